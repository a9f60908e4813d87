// SPDX-License-Identifier: Apache-2.0

use std::cmp::Ordering;
use std::collections::{BinaryHeap, HashMap};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::trace::{Marker, MarkerKind, Offer, Trace, TraceRecord};
use super::{DelayModel, Time};
use crate::error::{Error, Result};
use crate::ncl::{decode_word, encode_word, isc_next, threshold_step, DualRail, GateKind};
use crate::netlist::{GateId, NetDriver, NetId, Netlist};

#[derive(Debug, Clone, Copy)]
enum Eval {
    Threshold(u32),
    Inverter,
    Isc { illegal_to_one: bool },
}

/// Flattened, immutable view of a netlist for simulation. Share one across
/// any number of [`Simulator`]s.
#[derive(Debug, Clone)]
pub struct CompiledNetlist {
    netlist: Netlist,
    eval: Vec<Eval>,
    in_start: Vec<u32>,
    in_nets: Vec<u32>,
    weights: Vec<u32>,
    outputs: Vec<[u32; 2]>,
    n_out: Vec<u8>,
    fanout_start: Vec<u32>,
    fanout: Vec<u32>,
    po_of_net: Vec<u32>,
    /// For each net, `(pair index, level)` of the level input it belongs to.
    pair_of_net: Vec<(u32, u32)>,
    level_pairs: Vec<crate::netlist::RailPair>,
    level_sizes: Vec<usize>,
}

const NONE: u32 = u32::MAX;

impl CompiledNetlist {
    pub fn new(netlist: Netlist) -> Result<Self> {
        netlist.validate()?;
        let g = netlist.gates.len();
        let mut eval = Vec::with_capacity(g);
        let mut in_start = Vec::with_capacity(g + 1);
        let mut in_nets = Vec::new();
        let mut weights = Vec::new();
        let mut outputs = Vec::with_capacity(g);
        let mut n_out = Vec::with_capacity(g);
        let mut fan: Vec<Vec<u32>> = vec![Vec::new(); netlist.nets.len()];
        for gate in &netlist.gates {
            eval.push(match gate.spec.kind {
                GateKind::Threshold => Eval::Threshold(gate.spec.threshold),
                GateKind::Inverter => Eval::Inverter,
                GateKind::Isc => Eval::Isc {
                    illegal_to_one: gate.spec.illegal_to_one,
                },
            });
            in_start.push(in_nets.len() as u32);
            for (&n, &w) in gate.inputs.iter().zip(&gate.spec.weights) {
                in_nets.push(n as u32);
                weights.push(w);
                let f = &mut fan[n];
                if f.last() != Some(&(gate.id as u32)) {
                    f.push(gate.id as u32);
                }
            }
            outputs.push([gate.output as u32, gate.aux_output.map_or(NONE, |n| n as u32)]);
            n_out.push(gate.spec.outputs() as u8);
        }
        in_start.push(in_nets.len() as u32);
        let mut fanout_start = Vec::with_capacity(fan.len() + 1);
        let mut fanout = Vec::new();
        for f in &fan {
            fanout_start.push(fanout.len() as u32);
            fanout.extend_from_slice(f);
        }
        fanout_start.push(fanout.len() as u32);
        let mut po_of_net = vec![NONE; netlist.nets.len()];
        for (i, p) in netlist.primary_outputs.iter().enumerate() {
            po_of_net[p.d1] = i as u32;
            po_of_net[p.d0] = i as u32;
        }
        let mut pair_of_net = vec![(NONE, NONE); netlist.nets.len()];
        let mut level_pairs = Vec::new();
        let mut level_sizes = Vec::new();
        if let Some(h) = &netlist.handshake {
            for (level, pairs) in h.level_inputs.iter().enumerate() {
                level_sizes.push(pairs.len());
                for p in pairs {
                    let i = level_pairs.len() as u32;
                    pair_of_net[p.d1] = (i, level as u32);
                    pair_of_net[p.d0] = (i, level as u32);
                    level_pairs.push(*p);
                }
            }
        }
        Ok(CompiledNetlist {
            pair_of_net,
            level_pairs,
            level_sizes,
            netlist,
            eval,
            in_start,
            in_nets,
            weights,
            outputs,
            n_out,
            fanout_start,
            fanout,
            po_of_net,
        })
    }

    pub fn netlist(&self) -> &Netlist {
        &self.netlist
    }

    fn inputs(&self, g: usize) -> std::ops::Range<usize> {
        self.in_start[g] as usize..self.in_start[g + 1] as usize
    }

    fn fanout(&self, net: usize) -> &[u32] {
        &self.fanout[self.fanout_start[net] as usize..self.fanout_start[net + 1] as usize]
    }
}

/// One pipeline operation: `a + b + cin`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Operands {
    pub a: u64,
    pub b: u64,
    #[serde(default)]
    pub cin: bool,
}

impl Operands {
    pub fn new(a: u64, b: u64) -> Self {
        Operands { a, b, cin: false }
    }

    pub fn with_carry(a: u64, b: u64, cin: bool) -> Self {
        Operands { a, b, cin }
    }

    pub fn sum(&self) -> u64 {
        self.a + self.b + self.cin as u64
    }

    /// `count` seeded operand triples of `width` bits.
    pub fn random(width: usize, count: usize, seed: u64) -> Vec<Operands> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mask = if width >= 64 { u64::MAX } else { (1u64 << width) - 1 };
        (0..count)
            .map(|_| Operands::with_carry(rng.gen::<u64>() & mask, rng.gen::<u64>() & mask, rng.gen()))
            .collect()
    }

    /// Every `(a, b, cin)` of `width` bits, `a` outermost.
    pub fn exhaustive(width: usize) -> Vec<Operands> {
        let n = 1u64 << width;
        (0..n)
            .flat_map(|a| (0..n).flat_map(move |b| [false, true].map(|cin| Operands::with_carry(a, b, cin))))
            .collect()
    }
}

/// A DATA wavefront observed by the consumer.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Token {
    pub time: Time,
    /// `None` when some output signal was illegal at completion.
    pub value: Option<u64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RunStatus {
    Completed,
    Deadlocked,
    Timeout,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Progress {
    Progressing,
    Deadlocked,
    Completed,
}

/// How an upset disturbs its gate.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(tag = "model", rename_all = "kebab-case")]
pub enum UpsetModel {
    /// The output node is driven to the inverse of its value for `duration`.
    OutputInvert { duration: Time },
    /// The stored state bit flips; the gate then re-evaluates normally.
    StateFlip,
}

/// A fault at an absolute simulation time.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Injection {
    pub time: Time,
    pub gate: GateId,
    /// 0 for the primary output, 1 for the D^0 output of two-output gates.
    pub output: usize,
    pub model: UpsetModel,
}

#[derive(Debug, Clone)]
pub struct RunOptions {
    /// Defaults to 10,000 x d_max per token.
    pub max_time: Option<Time>,
    /// Producer/consumer response delay.
    pub env_delay: Time,
    pub record_trace: bool,
    pub injections: Vec<Injection>,
}

impl Default for RunOptions {
    fn default() -> Self {
        RunOptions {
            max_time: None,
            env_delay: 1,
            record_trace: false,
            injections: Vec::new(),
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct PipelineRun {
    pub status: RunStatus,
    pub tokens: Vec<Token>,
    pub t_dd: Option<f64>,
    /// Net transitions over the whole run.
    pub transitions: u64,
    pub end_time: Time,
    /// `(time, output signal index)` whenever a primary output became 11.
    pub illegal_outputs: Vec<(Time, usize)>,
    #[serde(skip)]
    pub trace: Trace,
}

impl PipelineRun {
    pub fn values(&self) -> Vec<Option<u64>> {
        self.tokens.iter().map(|t| t.value).collect()
    }

    /// Token summary: `{tokens, t_dd_avg, status}`.
    pub fn summary_json(&self) -> serde_json::Value {
        serde_json::json!({
            "tokens": self.tokens,
            "t_dd_avg": self.t_dd,
            "status": self.status,
        })
    }
}

#[derive(Debug, Clone, Copy)]
enum Action {
    Gate { gate: u32, value: u8, gen: u32 },
    Release { gate: u32, stamp: Time },
    NetRelease { net: u32, stamp: Time },
    Drive { net: u32, value: bool },
    ForceNet { net: u32, value: bool, duration: Time },
    Inject(Injection),
    Produce { data: bool },
    Consume { request: bool },
}

#[derive(Debug, Clone, Copy)]
struct Queued {
    time: Time,
    seq: u64,
    action: Action,
}

impl PartialEq for Queued {
    fn eq(&self, other: &Self) -> bool {
        self.time == other.time && self.seq == other.seq
    }
}
impl Eq for Queued {}
impl PartialOrd for Queued {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for Queued {
    // min-heap on (time, seq)
    fn cmp(&self, other: &Self) -> Ordering {
        (other.time, other.seq).cmp(&(self.time, self.seq))
    }
}

#[derive(Debug, Clone)]
struct Environment {
    stimulus: Vec<Vec<DualRail>>,
    next: usize,
    offering_data: bool,
    producer_pending: bool,
    waiting_data: bool,
    consumer_pending: bool,
    tokens: Vec<Token>,
}

/// Simulation state of one netlist: net values, gate states, and the
/// time-ordered event queue (FIFO among equal times).
pub struct Simulator<'a> {
    c: &'a CompiledNetlist,
    delays: Vec<Time>,
    d_max: Time,
    time: Time,
    nets: Vec<bool>,
    state: Vec<u8>,
    driven: Vec<u8>,
    gen: Vec<u32>,
    forced_until: Vec<Time>,
    forced_mask: Vec<u8>,
    env_forced: HashMap<usize, (Time, bool)>,
    queue: BinaryHeap<Queued>,
    seq: u64,
    changed: Vec<usize>,
    affected: Vec<usize>,
    mark: Vec<u64>,
    batch: u64,
    record: bool,
    trace: Trace,
    transitions: u64,
    level_state: Vec<bool>,
    po_rails: Vec<u8>,
    po_asserted: usize,
    pair_asserted: Vec<bool>,
    level_asserted: Vec<usize>,
    level_data: Vec<bool>,
    illegal_outputs: Vec<(Time, usize)>,
    env: Option<Environment>,
    env_delay: Time,
}

const NOT_FORCED: Time = Time::MAX;

impl<'a> Simulator<'a> {
    /// Reset: all rails NULL, every hysteresis state 0, completion detectors
    /// at rfd, consumer requesting data, empty queue at time 0.
    pub fn new(c: &'a CompiledNetlist, delay: &DelayModel) -> Result<Self> {
        let n = c.netlist();
        let g = n.gates.len();
        let delays = delay.assign(g)?;
        let mut nets = vec![false; n.nets.len()];
        for net in &n.nets {
            if let NetDriver::Constant(v) = net.driver {
                nets[net.id] = v;
            }
        }
        if let Some(h) = &n.handshake {
            nets[h.consumer_request] = true;
        }
        let mut sim = Simulator {
            c,
            delays,
            d_max: delay.d_max(),
            time: 0,
            nets,
            state: vec![0; g],
            driven: vec![0; g],
            gen: vec![0; g],
            forced_until: vec![NOT_FORCED; g],
            forced_mask: vec![0; g],
            env_forced: HashMap::new(),
            queue: BinaryHeap::new(),
            seq: 0,
            changed: Vec::new(),
            affected: Vec::new(),
            mark: vec![0; g],
            batch: 0,
            record: false,
            trace: Trace::default(),
            transitions: 0,
            level_state: Vec::new(),
            po_rails: vec![0; n.primary_outputs.len()],
            po_asserted: 0,
            pair_asserted: vec![false; c.level_pairs.len()],
            level_asserted: vec![0; c.level_sizes.len()],
            level_data: vec![false; c.level_sizes.len()],
            illegal_outputs: Vec::new(),
            env: None,
            env_delay: 1,
        };
        sim.settle_reset()?;
        sim.level_state = n
            .handshake
            .as_ref()
            .map(|h| {
                let mut v: Vec<bool> = h
                    .stage_requests
                    .iter()
                    .map(|reqs| reqs.iter().all(|&r| sim.nets[r]))
                    .collect();
                v.push(sim.nets[h.consumer_request]);
                v
            })
            .unwrap_or_default();
        if sim.level_state.iter().any(|&v| !v) {
            return Err(Error::IllegalNetlist("completion detectors not at rfd after reset".into()));
        }
        if n.primary_outputs.iter().any(|p| sim.nets[p.d1] || sim.nets[p.d0]) {
            return Err(Error::IllegalNetlist("primary outputs not NULL after reset".into()));
        }
        Ok(sim)
    }

    /// Iterates gate outputs from the all-zero state to a fixed point with no
    /// events; fails if the reset state is not stable.
    fn settle_reset(&mut self) -> Result<()> {
        let g = self.c.netlist().gates.len();
        for _ in 0..=g + 1 {
            let mut changed = false;
            for gate in 0..g {
                let new = self.next_state(gate);
                if new != self.state[gate] {
                    changed = true;
                    self.state[gate] = new;
                    self.driven[gate] = new;
                    for i in 0..self.c.n_out[gate] as usize {
                        let net = self.c.outputs[gate][i] as usize;
                        self.nets[net] = (new >> i) & 1 == 1;
                    }
                }
            }
            if !changed {
                return Ok(());
            }
        }
        Err(Error::IllegalNetlist("reset state does not settle".into()))
    }

    pub fn time(&self) -> Time {
        self.time
    }

    pub fn net(&self, net: NetId) -> bool {
        self.nets[net]
    }

    pub fn nets(&self) -> &[bool] {
        &self.nets
    }

    pub fn pair(&self, p: crate::netlist::RailPair) -> DualRail {
        DualRail::new(self.nets[p.d1], self.nets[p.d0])
    }

    pub fn outputs(&self) -> Vec<DualRail> {
        self.c
            .netlist()
            .primary_outputs
            .iter()
            .map(|&p| self.pair(p))
            .collect()
    }

    pub fn gate_state(&self, gate: GateId) -> u8 {
        self.state[gate]
    }

    pub fn pending_events(&self) -> usize {
        self.queue.len()
    }

    pub fn transitions(&self) -> u64 {
        self.transitions
    }

    pub fn delays(&self) -> &[Time] {
        &self.delays
    }

    pub fn set_recording(&mut self, on: bool) {
        self.record = on;
        if on && self.trace.initial.is_empty() {
            self.trace.initial = self.nets.clone();
        }
    }

    pub fn trace(&self) -> &Trace {
        &self.trace
    }

    fn push(&mut self, time: Time, action: Action) {
        debug_assert!(time >= self.time, "event scheduled into the past");
        self.seq += 1;
        self.queue.push(Queued {
            time,
            seq: self.seq,
            action,
        });
    }

    /// Schedules an environment write of `value` on an input-driven net.
    pub fn drive_at(&mut self, net: NetId, value: bool, time: Time) -> Result<()> {
        self.check_env_net(net)?;
        self.push(time.max(self.time), Action::Drive { net: net as u32, value });
        Ok(())
    }

    pub fn drive_pair_at(&mut self, p: crate::netlist::RailPair, v: DualRail, time: Time) -> Result<()> {
        self.drive_at(p.d1, v.d1, time)?;
        self.drive_at(p.d0, v.d0, time)
    }

    fn check_env_net(&self, net: NetId) -> Result<()> {
        match self.c.netlist().nets.get(net) {
            None => Err(Error::UnknownNet(net)),
            Some(n) if n.driver == NetDriver::Input => Ok(()),
            Some(_) => Err(Error::InvalidInput(format!("net {net} is not environment-driven"))),
        }
    }

    /// Holds `net` at `value` for `duration` time units starting now; then
    /// its driver takes over again.
    pub fn force_net(&mut self, net: NetId, value: bool, duration: Time) -> Result<()> {
        if net >= self.nets.len() {
            return Err(Error::UnknownNet(net));
        }
        if duration == 0 {
            return Err(Error::InvalidParameter("force duration must be >= 1".into()));
        }
        self.push(
            self.time,
            Action::ForceNet {
                net: net as u32,
                value,
                duration,
            },
        );
        Ok(())
    }

    pub fn schedule_injection(&mut self, inj: Injection) -> Result<()> {
        let n = self.c.netlist();
        let gate = n.gate(inj.gate)?;
        if inj.output >= gate.spec.outputs() {
            return Err(Error::InvalidParameter(format!(
                "gate {} has no output {}",
                inj.gate, inj.output
            )));
        }
        if let UpsetModel::OutputInvert { duration: 0 } = inj.model {
            return Err(Error::InvalidParameter("upset duration must be >= 1".into()));
        }
        self.push(inj.time.max(self.time), Action::Inject(inj));
        Ok(())
    }

    /// Runs until the queue drains or `max_time` passes. Returns `true` if
    /// the queue drained.
    pub fn run_until(&mut self, max_time: Time) -> bool {
        while let Some(top) = self.queue.peek() {
            if top.time > max_time {
                self.time = max_time;
                return false;
            }
            self.step_batch();
        }
        true
    }

    fn step_batch(&mut self) {
        let t = self.queue.peek().expect("non-empty").time;
        self.time = t;
        self.batch += 1;
        self.changed.clear();
        self.affected.clear();
        while self.queue.peek().is_some_and(|q| q.time == t) {
            let q = self.queue.pop().expect("peeked");
            self.apply(q.action);
        }
        for i in 0..self.changed.len() {
            let net = self.changed[i];
            for &g in self.c.fanout(net) {
                let g = g as usize;
                if self.mark[g] != self.batch {
                    self.mark[g] = self.batch;
                    self.affected.push(g);
                }
            }
        }
        for i in 0..self.affected.len() {
            let g = self.affected[i];
            self.evaluate(g);
        }
        self.observe();
    }

    fn set_net(&mut self, net: usize, value: bool) {
        if self.nets[net] == value {
            return;
        }
        self.nets[net] = value;
        self.changed.push(net);
        self.transitions += 1;
        if self.record {
            self.trace.records.push(TraceRecord {
                time: self.time,
                net,
                value,
            });
        }
        let (pair, level) = self.c.pair_of_net[net];
        if pair != NONE {
            self.update_level(pair as usize, level as usize);
        }
        let po = self.c.po_of_net[net];
        if po != NONE {
            let p = self.c.netlist().primary_outputs[po as usize];
            let bits = (self.nets[p.d1] as u8) << 1 | self.nets[p.d0] as u8;
            let before = self.po_rails[po as usize];
            if (before != 0) != (bits != 0) {
                if bits != 0 {
                    self.po_asserted += 1;
                } else {
                    self.po_asserted -= 1;
                }
            }
            self.po_rails[po as usize] = bits;
            if bits == 3 {
                self.illegal_outputs.push((self.time, po as usize));
            }
        }
    }

    fn update_level(&mut self, pair: usize, level: usize) {
        let p = self.c.level_pairs[pair];
        let asserted = self.nets[p.d1] || self.nets[p.d0];
        if asserted == self.pair_asserted[pair] {
            return;
        }
        self.pair_asserted[pair] = asserted;
        if asserted {
            self.level_asserted[level] += 1;
        } else {
            self.level_asserted[level] -= 1;
        }
        let n = self.level_asserted[level];
        let kind = if n == self.c.level_sizes[level] && !self.level_data[level] {
            self.level_data[level] = true;
            MarkerKind::InputsData
        } else if n == 0 && self.level_data[level] {
            self.level_data[level] = false;
            MarkerKind::InputsNull
        } else {
            return;
        };
        self.trace.markers.push(Marker {
            time: self.time,
            level,
            kind,
        });
    }

    fn touch(&mut self, g: usize) {
        if self.mark[g] != self.batch {
            self.mark[g] = self.batch;
            self.affected.push(g);
        }
    }

    fn apply(&mut self, action: Action) {
        match action {
            Action::Gate { gate, value, gen } => {
                let g = gate as usize;
                if gen != self.gen[g] {
                    return;
                }
                for i in 0..self.c.n_out[g] as usize {
                    if self.forced_mask[g] & (1 << i) != 0 {
                        continue;
                    }
                    self.set_net(self.c.outputs[g][i] as usize, (value >> i) & 1 == 1);
                }
            }
            Action::Release { gate, stamp } => {
                let g = gate as usize;
                if self.forced_until[g] == stamp {
                    self.forced_until[g] = NOT_FORCED;
                    self.forced_mask[g] = 0;
                    self.touch(g);
                }
            }
            Action::NetRelease { net, stamp } => {
                let net = net as usize;
                if let Some(&(until, shadow)) = self.env_forced.get(&net) {
                    if until == stamp {
                        self.env_forced.remove(&net);
                        self.set_net(net, shadow);
                    }
                }
            }
            Action::Drive { net, value } => self.env_write(net as usize, value),
            Action::ForceNet { net, value, duration } => {
                let net = net as usize;
                match self.c.netlist().nets[net].driver {
                    NetDriver::Gate(g) => {
                        let output = if self.c.outputs[g][0] as usize == net { 0 } else { 1 };
                        self.force_gate(g, output, value, duration);
                    }
                    _ => {
                        let until = self.time + duration;
                        let shadow = self
                            .env_forced
                            .get(&net)
                            .map_or(self.nets[net], |&(_, s)| s);
                        self.env_forced.insert(net, (until, shadow));
                        self.set_net(net, value);
                        self.push(until, Action::NetRelease { net: net as u32, stamp: until });
                    }
                }
            }
            Action::Inject(inj) => {
                let g = inj.gate;
                match inj.model {
                    UpsetModel::OutputInvert { duration } => {
                        let net = self.c.outputs[g][inj.output] as usize;
                        let value = !self.nets[net];
                        self.force_gate(g, inj.output, value, duration);
                    }
                    UpsetModel::StateFlip => {
                        self.gen[g] = self.gen[g].wrapping_add(1);
                        self.state[g] ^= 1 << inj.output;
                        match self.c.eval[g] {
                            Eval::Isc { .. } => {
                                // pending output events were cancelled; resync
                                self.driven[g] = self.output_bits(g);
                            }
                            _ => {
                                self.driven[g] = self.state[g];
                                let net = self.c.outputs[g][0] as usize;
                                self.set_net(net, self.state[g] & 1 == 1);
                            }
                        }
                        self.touch(g);
                    }
                }
            }
            Action::Produce { data } => self.produce(data),
            Action::Consume { request } => {
                let net = self
                    .c
                    .netlist()
                    .handshake
                    .as_ref()
                    .expect("consumer without handshake")
                    .consumer_request;
                self.env_write(net, request);
                if let Some(env) = self.env.as_mut() {
                    env.waiting_data = request;
                    env.consumer_pending = false;
                }
            }
        }
    }

    fn env_write(&mut self, net: usize, value: bool) {
        if let Some(f) = self.env_forced.get_mut(&net) {
            f.1 = value;
        } else {
            self.set_net(net, value);
        }
    }

    fn output_bits(&self, g: usize) -> u8 {
        let mut bits = 0;
        for i in 0..self.c.n_out[g] as usize {
            bits |= (self.nets[self.c.outputs[g][i] as usize] as u8) << i;
        }
        bits
    }

    fn force_gate(&mut self, g: usize, output: usize, value: bool, duration: Time) {
        let until = self.time + duration;
        self.forced_until[g] = until;
        self.forced_mask[g] |= 1 << output;
        self.gen[g] = self.gen[g].wrapping_add(1);
        let bit = 1u8 << output;
        match self.c.eval[g] {
            // the output node is the state node
            Eval::Threshold(_) | Eval::Inverter => {
                self.state[g] = value as u8;
                self.driven[g] = value as u8;
            }
            // buffered output: internal state is untouched
            Eval::Isc { .. } => {
                let cur = self.output_bits(g);
                self.driven[g] = if value { cur | bit } else { cur & !bit };
            }
        }
        self.set_net(self.c.outputs[g][output] as usize, value);
        self.push(until, Action::Release { gate: g as u32, stamp: until });
    }

    fn next_state(&self, g: usize) -> u8 {
        let r = self.c.inputs(g);
        match self.c.eval[g] {
            Eval::Threshold(m) => {
                let mut sum = 0;
                for i in r {
                    if self.nets[self.c.in_nets[i] as usize] {
                        sum += self.c.weights[i];
                    }
                }
                threshold_step(m, sum, self.state[g] & 1 == 1) as u8
            }
            Eval::Inverter => !self.nets[self.c.in_nets[r.start] as usize] as u8,
            Eval::Isc { illegal_to_one } => {
                let ins = &self.c.in_nets[r];
                let input = DualRail::new(self.nets[ins[0] as usize], self.nets[ins[1] as usize]);
                let mut reqs = [false; 2];
                let n_req = ins.len() - 2;
                for (k, &n) in ins[2..].iter().enumerate() {
                    reqs[k] = self.nets[n as usize];
                }
                let s = self.state[g];
                let prev = DualRail::new(s & 1 == 1, s & 2 != 0);
                let next = isc_next(prev, input, &reqs[..n_req], illegal_to_one);
                next.d1 as u8 | (next.d0 as u8) << 1
            }
        }
    }

    fn evaluate(&mut self, g: usize) {
        let new = self.next_state(g);
        if self.forced_until[g] != NOT_FORCED {
            if let Eval::Isc { .. } = self.c.eval[g] {
                self.state[g] = new;
            }
            return;
        }
        self.state[g] = new;
        if new != self.driven[g] {
            self.driven[g] = new;
            self.gen[g] = self.gen[g].wrapping_add(1);
            let gen = self.gen[g];
            self.push(
                self.time + self.delays[g],
                Action::Gate {
                    gate: g as u32,
                    value: new,
                    gen,
                },
            );
        }
    }

    fn observe(&mut self) {
        let Some(h) = self.c.netlist().handshake.as_ref() else {
            return;
        };
        for level in 0..self.level_state.len() {
            let nets: &[NetId] = if level < h.stage_requests.len() {
                &h.stage_requests[level]
            } else {
                std::slice::from_ref(&h.consumer_request)
            };
            let first = self.nets[nets[0]];
            if first != self.level_state[level] && nets.iter().all(|&n| self.nets[n] == first) {
                self.level_state[level] = first;
                self.trace.markers.push(Marker {
                    time: self.time,
                    level,
                    kind: if first {
                        MarkerKind::NullComplete
                    } else {
                        MarkerKind::DataComplete
                    },
                });
            }
        }
        let Some(mut env) = self.env.take() else {
            return;
        };
        let reqs = h.producer_requests();
        if !env.producer_pending {
            if !env.offering_data && env.next < env.stimulus.len() && reqs.iter().all(|&r| self.nets[r]) {
                env.producer_pending = true;
                self.push(self.time + self.env_delay, Action::Produce { data: true });
            } else if env.offering_data && reqs.iter().all(|&r| !self.nets[r]) {
                env.producer_pending = true;
                self.push(self.time + self.env_delay, Action::Produce { data: false });
            }
        }
        if !env.consumer_pending {
            let n_po = self.po_rails.len();
            if env.waiting_data && self.po_asserted == n_po {
                let value = decode_word(&self.outputs());
                env.tokens.push(Token { time: self.time, value });
                env.consumer_pending = true;
                self.push(self.time + self.env_delay, Action::Consume { request: false });
            } else if !env.waiting_data && self.po_asserted == 0 {
                env.consumer_pending = true;
                self.push(self.time + self.env_delay, Action::Consume { request: true });
            }
        }
        self.env = Some(env);
    }

    fn produce(&mut self, data: bool) {
        let Some(mut env) = self.env.take() else {
            return;
        };
        let inputs = self.c.netlist().primary_inputs.clone();
        if data {
            let word = &env.stimulus[env.next];
            for (p, v) in inputs.iter().zip(word) {
                self.env_write(p.d1, v.d1);
                self.env_write(p.d0, v.d0);
            }
        } else {
            for p in &inputs {
                self.env_write(p.d1, false);
                self.env_write(p.d0, false);
            }
            env.next += 1;
        }
        env.offering_data = data;
        env.producer_pending = false;
        self.trace.offers.push(Offer { time: self.time, data });
        self.env = Some(env);
    }

    /// Drives the four-phase handshake with `operands` and collects output
    /// tokens. Requires a pipeline netlist.
    pub fn run_pipeline(&mut self, operands: &[Operands], opts: &RunOptions) -> Result<PipelineRun> {
        let n = self.c.netlist();
        if n.handshake.is_none() {
            return Err(Error::InvalidInput("netlist has no handshake interface".into()));
        }
        let w = n.width;
        let limit = if w >= 64 { u64::MAX } else { (1u64 << w) - 1 };
        let mut stimulus = Vec::with_capacity(operands.len());
        for op in operands {
            if op.a > limit || op.b > limit {
                return Err(Error::InvalidInput(format!(
                    "operands {}+{} do not fit {w} bits",
                    op.a, op.b
                )));
            }
            let mut word = encode_word(op.a, w);
            word.extend(encode_word(op.b, w));
            word.push(crate::ncl::encode_bit(op.cin));
            stimulus.push(word);
        }
        self.env_delay = opts.env_delay.max(1);
        self.set_recording(opts.record_trace);
        if !opts.record_trace {
            self.trace.initial = self.nets.clone();
        }
        for inj in &opts.injections {
            self.schedule_injection(*inj)?;
        }
        let expected = operands.len();
        self.env = Some(Environment {
            stimulus,
            next: 0,
            offering_data: false,
            producer_pending: false,
            waiting_data: self.nets[n.handshake.as_ref().unwrap().consumer_request],
            consumer_pending: false,
            tokens: Vec::new(),
        });
        self.observe();
        let max_time = opts.max_time.unwrap_or_else(|| {
            self.time + 10_000 * self.d_max.max(self.env_delay) * (expected as Time + 1)
        });
        let drained = self.run_until(max_time);
        let tokens = self.env.as_ref().map(|e| e.tokens.clone()).unwrap_or_default();
        let status = if !drained {
            RunStatus::Timeout
        } else if tokens.len() >= expected {
            RunStatus::Completed
        } else {
            RunStatus::Deadlocked
        };
        let t_dd = (tokens.len() >= 2).then(|| {
            let span = tokens.last().unwrap().time - tokens[0].time;
            span as f64 / (tokens.len() - 1) as f64
        });
        Ok(PipelineRun {
            status,
            tokens,
            t_dd,
            transitions: self.transitions,
            end_time: self.time,
            illegal_outputs: self.illegal_outputs.clone(),
            trace: self.trace.clone(),
        })
    }

    /// Classifies the handshake: completed once `expected` tokens arrived,
    /// deadlocked when nothing is pending and tokens are missing.
    pub fn detect_deadlock(&self, expected: usize) -> Progress {
        let got = self.env.as_ref().map_or(0, |e| e.tokens.len());
        if got >= expected {
            Progress::Completed
        } else if self.queue.is_empty() {
            Progress::Deadlocked
        } else {
            Progress::Progressing
        }
    }

    pub fn tokens(&self) -> &[Token] {
        self.env.as_ref().map_or(&[], |e| &e.tokens)
    }
}

/// Convenience wrapper: reset a fresh simulator and run the handshake.
pub fn run_pipeline(
    compiled: &CompiledNetlist,
    operands: &[Operands],
    delay: &DelayModel,
    opts: &RunOptions,
) -> Result<PipelineRun> {
    let mut sim = Simulator::new(compiled, delay)?;
    sim.run_pipeline(operands, opts)
}
