// SPDX-License-Identifier: Apache-2.0

//! Netlist construction: registers, completion detection, ISC banks, the
//! TH22 merge layer, the dual-rail carry-lookahead adder, and full pipelines.

use std::collections::BTreeSet;

use super::{
    Annotation, Architecture, Gate, GateId, Handshake, Net, NetDriver, NetId, Netlist,
    PartitionSpec, RailPair, Replica, Role,
};
use crate::error::{Error, Result};
use crate::ncl::GateSpec;

/// Bits per lookahead group.
const GROUP: usize = 4;

pub(crate) struct NetlistBuilder {
    gates: Vec<Gate>,
    nets: Vec<Net>,
    pending: BTreeSet<NetId>,
    ann: Annotation,
}

impl NetlistBuilder {
    pub(crate) fn new() -> Self {
        NetlistBuilder {
            gates: Vec::new(),
            nets: Vec::new(),
            pending: BTreeSet::new(),
            ann: Annotation {
                stage: 0,
                role: Role::ClMsu,
                copy: Replica::Shared,
            },
        }
    }

    fn set(&mut self, stage: usize, role: Role, copy: Replica) {
        self.ann = Annotation { stage, role, copy };
    }

    fn new_net(&mut self, driver: NetDriver) -> NetId {
        let id = self.nets.len();
        self.nets.push(Net { id, driver });
        id
    }

    fn input(&mut self) -> NetId {
        self.new_net(NetDriver::Input)
    }

    fn input_pair(&mut self) -> RailPair {
        RailPair {
            d1: self.input(),
            d0: self.input(),
        }
    }

    /// A net whose driver is attached later with [`Self::gate_into`].
    fn reserve(&mut self) -> NetId {
        let id = self.new_net(NetDriver::Input);
        self.pending.insert(id);
        id
    }

    fn push_gate(&mut self, spec: GateSpec, inputs: Vec<NetId>, output: NetId, aux: Option<NetId>) -> GateId {
        debug_assert_eq!(spec.arity(), inputs.len());
        let id = self.gates.len();
        self.gates.push(Gate {
            id,
            spec,
            inputs,
            output,
            aux_output: aux,
            ann: self.ann,
        });
        id
    }

    fn gate(&mut self, spec: GateSpec, inputs: Vec<NetId>) -> NetId {
        let out = self.new_net(NetDriver::Input);
        let g = self.push_gate(spec, inputs, out, None);
        self.nets[out].driver = NetDriver::Gate(g);
        out
    }

    fn gate_into(&mut self, out: NetId, spec: GateSpec, inputs: Vec<NetId>) {
        assert!(self.pending.remove(&out), "net {out} was not reserved");
        let g = self.push_gate(spec, inputs, out, None);
        self.nets[out].driver = NetDriver::Gate(g);
    }

    fn and2(&mut self, a: NetId, b: NetId) -> NetId {
        self.gate(GateSpec::th22(), vec![a, b])
    }

    /// OR with hysteresis-free TH1n gates, at most four inputs per gate.
    fn or_tree(&mut self, inputs: &[NetId]) -> NetId {
        match inputs.len() {
            0 => panic!("empty OR"),
            1 => inputs[0],
            n if n <= 4 => self.gate(GateSpec::th(1, n), inputs.to_vec()),
            _ => {
                let parts: Vec<NetId> = inputs.chunks(4).map(|c| self.or_tree(c)).collect();
                self.or_tree(&parts)
            }
        }
    }

    fn isc(&mut self, input: RailPair, requests: &[NetId], illegal_to_one: bool) -> RailPair {
        let d1 = self.new_net(NetDriver::Input);
        let d0 = self.new_net(NetDriver::Input);
        let mut inputs = vec![input.d1, input.d0];
        inputs.extend_from_slice(requests);
        let g = self.push_gate(GateSpec::isc(requests.len(), illegal_to_one), inputs, d1, Some(d0));
        self.nets[d1].driver = NetDriver::Gate(g);
        self.nets[d0].driver = NetDriver::Gate(g);
        RailPair { d1, d0 }
    }

    /// Register bank: each rail is a C-element of the data rail and every
    /// request input (TH22 for a single request, TH33 for two).
    fn register(&mut self, data: &[RailPair], requests: &[NetId]) -> Vec<RailPair> {
        let k = requests.len() as u32 + 1;
        data.iter()
            .map(|p| {
                let mut rail = |x: NetId| {
                    let mut ins = vec![x];
                    ins.extend_from_slice(requests);
                    self.gate(GateSpec::th(k, k as usize), ins)
                };
                RailPair {
                    d1: rail(p.d1),
                    d0: rail(p.d0),
                }
            })
            .collect()
    }

    fn merge(&mut self, a: &[RailPair], b: &[RailPair]) -> Vec<RailPair> {
        a.iter()
            .zip(b)
            .map(|(x, y)| RailPair {
                d1: self.and2(x.d1, y.d1),
                d0: self.and2(x.d0, y.d0),
            })
            .collect()
    }

    /// Completion detection: rail-OR per signal, TH22 tree, inverter.
    /// Output is 0 (rfn) once every signal is DATA and 1 (rfd) once all are NULL.
    fn completion(&mut self, signals: &[RailPair], out: NetId) {
        let mut level: Vec<NetId> = signals
            .iter()
            .map(|p| self.gate(GateSpec::th12(), vec![p.d1, p.d0]))
            .collect();
        while level.len() > 1 {
            let mut next = Vec::with_capacity(level.len().div_ceil(2));
            for pair in level.chunks(2) {
                next.push(if pair.len() == 2 {
                    self.and2(pair[0], pair[1])
                } else {
                    pair[0]
                });
            }
            level = next;
        }
        self.gate_into(out, GateSpec::inverter(), vec![level[0]]);
    }

    /// Dual-rail adder over `x + y + cin`, LSB first. Carries are computed per
    /// four-bit lookahead group from generate/kill/propagate; sums come from
    /// NCL full-adder cells fed with the lookahead carries.
    fn cla(&mut self, x: &[RailPair], y: &[RailPair], cin: RailPair) -> (Vec<RailPair>, RailPair) {
        let n = x.len();
        let mut gen = Vec::with_capacity(n);
        let mut kill = Vec::with_capacity(n);
        let mut prop = Vec::with_capacity(n);
        for (a, b) in x.iter().zip(y) {
            gen.push(self.and2(a.d1, b.d1));
            kill.push(self.and2(a.d0, b.d0));
            let pa = self.and2(a.d1, b.d0);
            let pb = self.and2(a.d0, b.d1);
            prop.push(self.gate(GateSpec::th12(), vec![pa, pb]));
        }

        let mut carries = vec![cin];
        let mut group_cin = cin;
        let mut start = 0;
        while start < n {
            let end = (start + GROUP).min(n);
            for j in start + 1..=end {
                let mut ones = vec![gen[j - 1]];
                let mut zeros = vec![kill[j - 1]];
                // Product of propagates p[m+1..j], extended one bit per step
                // so every asserted product is consumed by some later gate.
                let mut product = prop[j - 1];
                for m in (start..j - 1).rev() {
                    ones.push(self.and2(product, gen[m]));
                    zeros.push(self.and2(product, kill[m]));
                    product = self.and2(prop[m], product);
                }
                ones.push(self.and2(product, group_cin.d1));
                zeros.push(self.and2(product, group_cin.d0));
                carries.push(RailPair {
                    d1: self.or_tree(&ones),
                    d0: self.or_tree(&zeros),
                });
            }
            group_cin = carries[end];
            start = end;
        }

        let sums = (0..n)
            .map(|i| {
                let (a, b, c) = (x[i], y[i], carries[i]);
                let co1 = self.gate(GateSpec::th23(), vec![a.d1, b.d1, c.d1]);
                let co0 = self.gate(GateSpec::th23(), vec![a.d0, b.d0, c.d0]);
                RailPair {
                    d1: self.gate(GateSpec::th34w2(), vec![co0, a.d1, b.d1, c.d1]),
                    d0: self.gate(GateSpec::th34w2(), vec![co1, a.d0, b.d0, c.d0]),
                }
            })
            .collect();
        (sums, carries[n])
    }

    fn finish(self, width: usize) -> Netlist {
        assert!(self.pending.is_empty(), "unconnected reserved nets {:?}", self.pending);
        Netlist {
            width,
            architecture: None,
            partition: None,
            stages: 0,
            gates: self.gates,
            nets: self.nets,
            primary_inputs: Vec::new(),
            primary_outputs: Vec::new(),
            control_inputs: Vec::new(),
            control_outputs: Vec::new(),
            handshake: None,
            lsu_carry: None,
        }
    }
}

/// Combinational dual-rail CLA: inputs `a`, `b`, carry-in; outputs sum and carry-out.
pub fn build_ncl_cla(width: usize) -> Result<Netlist> {
    if width < 2 {
        return Err(Error::InvalidParameter(format!("adder width must be >= 2, got {width}")));
    }
    let mut b = NetlistBuilder::new();
    let x: Vec<RailPair> = (0..width).map(|_| b.input_pair()).collect();
    let y: Vec<RailPair> = (0..width).map(|_| b.input_pair()).collect();
    let cin = b.input_pair();
    let (mut sums, cout) = b.cla(&x, &y, cin);
    sums.push(cout);
    let mut n = b.finish(width);
    n.primary_inputs = x.into_iter().chain(y).chain([cin]).collect();
    n.primary_outputs = sums;
    Ok(n)
}

/// Register bank with one or two request inputs (`control_inputs`).
pub fn build_register_stage(width: usize, dual_ki: bool) -> Result<Netlist> {
    if width == 0 {
        return Err(Error::InvalidParameter("register width must be >= 1".into()));
    }
    let mut b = NetlistBuilder::new();
    b.set(0, Role::Reg, Replica::Shared);
    let data: Vec<RailPair> = (0..width).map(|_| b.input_pair()).collect();
    let kis: Vec<NetId> = (0..if dual_ki { 2 } else { 1 }).map(|_| b.input()).collect();
    let out = b.register(&data, &kis);
    let mut n = b.finish(width);
    n.primary_inputs = data;
    n.primary_outputs = out;
    n.control_inputs = kis;
    Ok(n)
}

/// Completion detector over `width` signals; its output is `control_outputs[0]`.
pub fn build_cd(width: usize) -> Result<Netlist> {
    if width == 0 {
        return Err(Error::InvalidParameter("completion width must be >= 1".into()));
    }
    let mut b = NetlistBuilder::new();
    b.set(0, Role::Cd, Replica::Shared);
    let data: Vec<RailPair> = (0..width).map(|_| b.input_pair()).collect();
    let out = b.reserve();
    b.completion(&data, out);
    let mut n = b.finish(width);
    n.primary_inputs = data;
    n.control_outputs = vec![out];
    Ok(n)
}

/// One ISC unit with two request inputs (`control_inputs`).
pub fn build_isc() -> Result<Netlist> {
    let mut b = NetlistBuilder::new();
    b.set(0, Role::Isc, Replica::Shared);
    let input = b.input_pair();
    let kis = vec![b.input(), b.input()];
    let out = b.isc(input, &kis, false);
    let mut n = b.finish(1);
    n.primary_inputs = vec![input];
    n.primary_outputs = vec![out];
    n.control_inputs = kis;
    Ok(n)
}

/// Non-redundant NCL pipeline around the adder.
pub fn build_ncl_pipeline(width: usize, stages: usize) -> Result<Netlist> {
    build_pipeline(Architecture::Ncl, width, None, stages, false)
}

/// Fully duplicated (DMR-NCL) pipeline.
pub fn build_dmr_ncl_cla(width: usize, stages: usize) -> Result<Netlist> {
    build_pipeline(Architecture::Dmr, width, None, stages, false)
}

/// Selectively redundant pipeline: duplicated MSU, shared LSU behind two ISC banks.
pub fn build_sr_ncl_cla(width: usize, partition: PartitionSpec, stages: usize) -> Result<Netlist> {
    build_pipeline(Architecture::Sr, width, Some(partition), stages, false)
}

/// Builds a pipeline of `stages` CL stages (`stages + 1` register levels).
///
/// Level `k` is: register bank(s), TH22 merge (redundant designs), and one
/// completion detector per copy reading the merged signals. CL stage 0 is the
/// adder; further stages pass data through. Level `k`'s registers are
/// requested by every completion detector of level `k + 1`; the last level is
/// requested by the consumer.
pub fn build_pipeline(
    arch: Architecture,
    width: usize,
    partition: Option<PartitionSpec>,
    stages: usize,
    illegal_to_one: bool,
) -> Result<Netlist> {
    if width < 2 {
        return Err(Error::InvalidParameter(format!("adder width must be >= 2, got {width}")));
    }
    if width > 62 {
        return Err(Error::InvalidParameter(format!("adder width must be <= 62, got {width}")));
    }
    if stages == 0 {
        return Err(Error::InvalidParameter("pipeline needs at least one CL stage".into()));
    }
    let partition = match (arch, partition) {
        (Architecture::Sr, Some(p)) => {
            let p = PartitionSpec::new(p.n, p.l)?;
            if p.n != width {
                return Err(Error::InvalidParameter(format!(
                    "partition width {} does not match adder width {width}",
                    p.n
                )));
            }
            Some(p)
        }
        (Architecture::Sr, None) => {
            return Err(Error::InvalidParameter("SR-NCL needs a partition".into()))
        }
        (_, Some(_)) => {
            return Err(Error::InvalidParameter("partition is only valid for SR-NCL".into()))
        }
        (_, None) => None,
    };

    let redundant = arch != Architecture::Ncl;
    let copies: &[Replica] = if redundant {
        &[Replica::A, Replica::B]
    } else {
        &[Replica::Shared]
    };

    let mut b = NetlistBuilder::new();
    let a_in: Vec<RailPair> = (0..width).map(|_| b.input_pair()).collect();
    let b_in: Vec<RailPair> = (0..width).map(|_| b.input_pair()).collect();
    let cin = b.input_pair();
    let consumer = b.input();
    let primary_inputs: Vec<RailPair> = a_in.iter().chain(&b_in).copied().chain([cin]).collect();

    let levels = stages + 1;
    let cd_out: Vec<Vec<NetId>> = (0..levels)
        .map(|_| copies.iter().map(|_| b.reserve()).collect())
        .collect();

    let mut level_in: Vec<Vec<RailPair>> = copies.iter().map(|_| primary_inputs.clone()).collect();
    let mut outputs = Vec::new();
    let mut lsu_carry = None;
    let mut level_inputs: Vec<Vec<RailPair>> = Vec::with_capacity(levels + 1);

    for k in 0..levels {
        let mut seen = std::collections::BTreeSet::new();
        level_inputs.push(level_in.iter().flatten().copied().filter(|p| seen.insert(p.d1)).collect());
        let requests: Vec<NetId> = if k < stages {
            cd_out[k + 1].clone()
        } else {
            vec![consumer; copies.len()]
        };
        let regs: Vec<Vec<RailPair>> = copies
            .iter()
            .zip(&level_in)
            .map(|(&c, data)| {
                b.set(k, Role::Reg, c);
                b.register(data, &requests)
            })
            .collect();
        let merged = if redundant {
            b.set(k, Role::Merge, Replica::Shared);
            b.merge(&regs[0], &regs[1])
        } else {
            regs[0].clone()
        };
        for (ci, &c) in copies.iter().enumerate() {
            b.set(k, Role::Cd, c);
            b.completion(&merged, cd_out[k][ci]);
        }
        if k == stages {
            outputs = merged;
            break;
        }
        if k > 0 {
            level_in = copies.iter().map(|_| merged.clone()).collect();
            continue;
        }

        let x = &merged[..width];
        let y = &merged[width..2 * width];
        let c0 = merged[2 * width];
        level_in = match arch {
            Architecture::Ncl | Architecture::Dmr => copies
                .iter()
                .map(|&c| {
                    b.set(0, Role::ClMsu, c);
                    let (mut s, cout) = b.cla(x, y, c0);
                    s.push(cout);
                    s
                })
                .collect(),
            Architecture::Sr => {
                let l = partition.expect("checked above").l;
                b.set(0, Role::ClLsu, Replica::Shared);
                let (low, q) = b.cla(&x[..l], &y[..l], c0);
                lsu_carry = Some(q);
                copies
                    .iter()
                    .map(|&c| {
                        b.set(0, Role::Isc, c);
                        let fixed: Vec<RailPair> = low
                            .iter()
                            .chain([&q])
                            .map(|&s| b.isc(s, &requests, illegal_to_one))
                            .collect();
                        let (low_c, q_c) = fixed.split_at(l);
                        b.set(0, Role::ClMsu, c);
                        let (high, cout) = b.cla(&x[l..], &y[l..], q_c[0]);
                        low_c.iter().chain(&high).copied().chain([cout]).collect()
                    })
                    .collect()
            }
        };
    }

    let mut n = b.finish(width);
    n.architecture = Some(arch);
    n.partition = partition;
    n.stages = stages;
    n.primary_inputs = primary_inputs;
    n.primary_outputs = outputs.clone();
    n.handshake = Some(Handshake {
        stage_requests: cd_out,
        consumer_request: consumer,
        level_inputs: {
            level_inputs.push(outputs.clone());
            level_inputs
        },
    });
    n.lsu_carry = lsu_carry;
    debug_assert!(n.validate().is_ok());
    Ok(n)
}

/// Returns a copy of an SR-NCL netlist whose LSU carry reaches the ISC banks
/// with its rails swapped, i.e. the carry into the MSU is inverted on every
/// operation.
pub fn invert_lsu_carry(netlist: &Netlist) -> Result<Netlist> {
    let q = netlist
        .lsu_carry
        .ok_or_else(|| Error::InvalidParameter("netlist has no LSU carry".into()))?;
    let mut out = netlist.clone();
    for g in out.gates.iter_mut().filter(|g| g.ann.role == Role::Isc) {
        if g.inputs[0] == q.d1 && g.inputs[1] == q.d0 {
            g.inputs.swap(0, 1);
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::netlist::count_gates;

    #[test]
    fn width_limits() {
        assert!(build_ncl_cla(1).is_err());
        assert!(build_ncl_cla(2).is_ok());
        assert!(build_dmr_ncl_cla(1, 1).is_err());
        assert!(build_dmr_ncl_cla(8, 0).is_err());
        assert!(PartitionSpec::new(8, 0).is_err());
        assert!(PartitionSpec::new(8, 8).is_err());
        assert!(build_pipeline(Architecture::Sr, 8, None, 1, false).is_err());
        assert!(build_pipeline(Architecture::Dmr, 8, Some(PartitionSpec { n: 8, l: 3 }), 1, false).is_err());
        assert!(build_sr_ncl_cla(8, PartitionSpec { n: 16, l: 3 }, 1).is_err());
    }

    #[test]
    fn built_netlists_validate() {
        for n in [
            build_ncl_cla(9).unwrap(),
            build_register_stage(3, true).unwrap(),
            build_cd(5).unwrap(),
            build_isc().unwrap(),
            build_ncl_pipeline(8, 2).unwrap(),
            build_dmr_ncl_cla(8, 1).unwrap(),
            build_sr_ncl_cla(8, PartitionSpec::new(8, 3).unwrap(), 3).unwrap(),
        ] {
            n.validate().unwrap();
        }
    }

    #[test]
    fn sr_audit_5_3() {
        let n = build_sr_ncl_cla(8, PartitionSpec::new(8, 3).unwrap(), 1).unwrap();
        let audit = n.audit_duplication();
        assert_eq!(audit.msu_bits, [5, 5]);
        assert_eq!(audit.lsu_bits, 3);
        // three sum bits plus the carry into the MSU, per copy
        assert_eq!(audit.isc_units, [4, 4]);
        assert!(audit.lsu_all_shared);
        assert!(audit.copies_isomorphic);
    }

    #[test]
    fn dmr_every_copy_a_gate_has_twin() {
        let n = build_dmr_ncl_cla(8, 1).unwrap();
        let audit = n.audit_duplication();
        assert_eq!(audit.msu_bits, [8, 8]);
        assert_eq!(audit.lsu_bits, 0);
        assert!(audit.copies_isomorphic);
        let a = n.gates.iter().filter(|g| g.ann.copy == Replica::A).count();
        let b = n.gates.iter().filter(|g| g.ann.copy == Replica::B).count();
        assert_eq!(a, b);
    }

    #[test]
    fn dmr_is_larger_than_plain() {
        let plain: usize = count_gates(&build_ncl_pipeline(8, 1).unwrap()).values().sum();
        let dmr: usize = count_gates(&build_dmr_ncl_cla(8, 1).unwrap()).values().sum();
        assert!(dmr > plain);
    }

    #[test]
    fn json_round_trip() {
        let n = build_sr_ncl_cla(4, PartitionSpec::new(4, 1).unwrap(), 1).unwrap();
        let s = n.to_json().unwrap();
        let back = Netlist::from_json(&s).unwrap();
        assert_eq!(n, back);
        let v: serde_json::Value = serde_json::from_str(&s).unwrap();
        let g = &v["gates"][0];
        for key in ["id", "kind", "m", "weights", "inputs", "output", "stage", "role", "copy"] {
            assert!(g.get(key).is_some(), "missing {key}");
        }
        assert_eq!(v["partition"]["n"], 4);
        assert_eq!(v["partition"]["l"], 1);
    }

    #[test]
    fn double_driver_is_rejected() {
        let mut n = build_ncl_cla(2).unwrap();
        let out = n.gates[0].output;
        n.gates[1].output = out;
        assert!(n.validate().is_err());
    }

    #[test]
    fn stateless_loop_is_rejected() {
        let mut n = build_cd(1).unwrap();
        // feed the inverter back into the rail-OR
        let inv = n.gates.iter().find(|g| g.spec.name() == "INV").unwrap().output;
        n.gates[0].inputs[0] = inv;
        assert!(matches!(n.validate(), Err(Error::IllegalNetlist(_))));
    }

    #[test]
    fn carry_inversion_swaps_isc_inputs() {
        let n = build_sr_ncl_cla(8, PartitionSpec::new(8, 3).unwrap(), 1).unwrap();
        let q = n.lsu_carry.unwrap();
        let inv = invert_lsu_carry(&n).unwrap();
        let swapped = inv
            .gates
            .iter()
            .filter(|g| g.inputs[0] == q.d0 && g.inputs[1] == q.d1)
            .count();
        assert_eq!(swapped, 2);
        assert!(invert_lsu_carry(&build_dmr_ncl_cla(8, 1).unwrap()).is_err());
    }
}
