// SPDX-License-Identifier: Apache-2.0

//! Annotated gate netlists.
//!
//! Every net carries one bit and has exactly one driver: a gate output, the
//! environment, or a constant. Dual-rail signals are pairs of nets. Gates
//! carry a `(stage, role, copy)` annotation used by fault enumeration and the
//! duplication audit.

mod builder;
mod cost;

pub use builder::{
    build_cd, build_dmr_ncl_cla, build_isc, build_ncl_cla, build_ncl_pipeline, build_pipeline,
    build_register_stage, build_sr_ncl_cla, invert_lsu_carry,
};
pub use cost::{count_gates, estimate_transistors, GateCostTable};

use std::collections::{BTreeMap, HashMap};
use std::fmt;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ncl::{GateKind, GateSpec};

pub type NetId = usize;
pub type GateId = usize;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Role {
    #[serde(rename = "CL_MSU")]
    ClMsu,
    #[serde(rename = "CL_LSU")]
    ClLsu,
    #[serde(rename = "ISC")]
    Isc,
    #[serde(rename = "REG")]
    Reg,
    #[serde(rename = "CD")]
    Cd,
    #[serde(rename = "MERGE")]
    Merge,
}

impl Role {
    pub const ALL: [Role; 6] = [Role::ClMsu, Role::ClLsu, Role::Isc, Role::Reg, Role::Cd, Role::Merge];

    pub fn as_str(self) -> &'static str {
        match self {
            Role::ClMsu => "CL_MSU",
            Role::ClLsu => "CL_LSU",
            Role::Isc => "ISC",
            Role::Reg => "REG",
            Role::Cd => "CD",
            Role::Merge => "MERGE",
        }
    }
}

impl fmt::Display for Role {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Role {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        Role::ALL
            .into_iter()
            .find(|r| r.as_str().eq_ignore_ascii_case(s))
            .ok_or_else(|| Error::InvalidParameter(format!("unknown role {s}")))
    }
}

/// Which copy of a duplicated structure a gate belongs to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Replica {
    A,
    B,
    Shared,
}

impl Replica {
    pub fn as_str(self) -> &'static str {
        match self {
            Replica::A => "a",
            Replica::B => "b",
            Replica::Shared => "shared",
        }
    }
}

impl fmt::Display for Replica {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Replica {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "a" => Ok(Replica::A),
            "b" => Ok(Replica::B),
            "shared" => Ok(Replica::Shared),
            _ => Err(Error::InvalidParameter(format!("unknown copy {s}"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Annotation {
    pub stage: usize,
    pub role: Role,
    pub copy: Replica,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(into = "GateRecord", try_from = "GateRecord")]
pub struct Gate {
    pub id: GateId,
    pub spec: GateSpec,
    pub inputs: Vec<NetId>,
    pub output: NetId,
    /// Second output (the D^0 rail) of two-output primitives such as ISC.
    pub aux_output: Option<NetId>,
    pub ann: Annotation,
}

impl Gate {
    pub fn outputs(&self) -> impl Iterator<Item = NetId> + '_ {
        std::iter::once(self.output).chain(self.aux_output)
    }
}

#[derive(Serialize, Deserialize)]
struct GateRecord {
    id: GateId,
    kind: String,
    m: u32,
    weights: Vec<u32>,
    inputs: Vec<NetId>,
    output: NetId,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    aux_output: Option<NetId>,
    stage: usize,
    role: Role,
    copy: Replica,
}

impl From<Gate> for GateRecord {
    fn from(g: Gate) -> Self {
        GateRecord {
            id: g.id,
            kind: g.spec.name(),
            m: g.spec.threshold,
            weights: g.spec.weights,
            inputs: g.inputs,
            output: g.output,
            aux_output: g.aux_output,
            stage: g.ann.stage,
            role: g.ann.role,
            copy: g.ann.copy,
        }
    }
}

impl TryFrom<GateRecord> for Gate {
    type Error = Error;
    fn try_from(r: GateRecord) -> Result<Self> {
        let spec = GateSpec::from_parts(&r.kind, r.m, r.weights)?;
        if spec.kind == GateKind::Isc && r.aux_output.is_none() {
            return Err(Error::MalformedGate(format!("gate {} ({}) needs aux_output", r.id, r.kind)));
        }
        Ok(Gate {
            id: r.id,
            spec,
            inputs: r.inputs,
            output: r.output,
            aux_output: r.aux_output,
            ann: Annotation {
                stage: r.stage,
                role: r.role,
                copy: r.copy,
            },
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum NetDriver {
    Gate(GateId),
    Input,
    Constant(bool),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Net {
    pub id: NetId,
    pub driver: NetDriver,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct RailPair {
    pub d1: NetId,
    pub d0: NetId,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Architecture {
    Ncl,
    Dmr,
    Sr,
}

impl FromStr for Architecture {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "ncl" => Ok(Architecture::Ncl),
            "dmr" => Ok(Architecture::Dmr),
            "sr" => Ok(Architecture::Sr),
            _ => Err(Error::InvalidParameter(format!("unknown architecture {s}"))),
        }
    }
}

/// Split of an adder into an MSU of `n - l` bits and an LSU of `l` bits.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct PartitionSpec {
    pub n: usize,
    pub l: usize,
}

impl PartitionSpec {
    pub fn new(n: usize, l: usize) -> Result<Self> {
        if l == 0 || l >= n {
            return Err(Error::InvalidParameter(format!(
                "partition needs 0 < L < N, got N={n} L={l}"
            )));
        }
        Ok(PartitionSpec { n, l })
    }

    pub fn msu_width(&self) -> usize {
        self.n - self.l
    }

    pub fn lsu_width(&self) -> usize {
        self.l
    }
}

impl fmt::Display for PartitionSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}|{}", self.msu_width(), self.l)
    }
}

/// Nets that close the four-phase handshake loop with the environment.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Handshake {
    /// Completion outputs of every register level, one entry per copy.
    pub stage_requests: Vec<Vec<NetId>>,
    /// Request the consumer drives into the last register level.
    pub consumer_request: NetId,
    /// Data signals entering each register level, all copies, without
    /// duplicates. The extra last entry is the primary outputs.
    #[serde(default)]
    pub level_inputs: Vec<Vec<RailPair>>,
}

impl Handshake {
    /// Requests the producer waits on: the completion outputs of level 0.
    pub fn producer_requests(&self) -> &[NetId] {
        &self.stage_requests[0]
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Netlist {
    pub width: usize,
    #[serde(default)]
    pub architecture: Option<Architecture>,
    pub partition: Option<PartitionSpec>,
    #[serde(default)]
    pub stages: usize,
    pub gates: Vec<Gate>,
    pub nets: Vec<Net>,
    /// Pipeline: `a[0..w]`, `b[0..w]`, carry-in. Subnets: their data inputs.
    pub primary_inputs: Vec<RailPair>,
    /// Pipeline: `sum[0..w]`, carry-out.
    pub primary_outputs: Vec<RailPair>,
    #[serde(default)]
    pub control_inputs: Vec<NetId>,
    #[serde(default)]
    pub control_outputs: Vec<NetId>,
    #[serde(default)]
    pub handshake: Option<Handshake>,
    /// Carry from the LSU into the MSU copies (before correction).
    #[serde(default)]
    pub lsu_carry: Option<RailPair>,
}

impl Netlist {
    pub fn gate(&self, id: GateId) -> Result<&Gate> {
        self.gates.get(id).ok_or(Error::UnknownGate(id))
    }

    pub fn net(&self, id: NetId) -> Result<&Net> {
        self.nets.get(id).ok_or(Error::UnknownNet(id))
    }

    /// Checks single drivers, index consistency, and the absence of loops
    /// made only of state-free gates (inverters and TH1n).
    pub fn validate(&self) -> Result<()> {
        for (i, n) in self.nets.iter().enumerate() {
            if n.id != i {
                return Err(Error::IllegalNetlist(format!("net index {i} has id {}", n.id)));
            }
        }
        let mut driven_by: Vec<Option<GateId>> = vec![None; self.nets.len()];
        for (i, g) in self.gates.iter().enumerate() {
            if g.id != i {
                return Err(Error::IllegalNetlist(format!("gate index {i} has id {}", g.id)));
            }
            if g.inputs.len() != g.spec.arity() {
                return Err(Error::MalformedGate(format!(
                    "gate {i} ({}) has {} inputs",
                    g.spec.name(),
                    g.inputs.len()
                )));
            }
            if g.spec.outputs() != g.outputs().count() {
                return Err(Error::MalformedGate(format!("gate {i} output count mismatch")));
            }
            for &n in &g.inputs {
                if n >= self.nets.len() {
                    return Err(Error::UnknownNet(n));
                }
            }
            for out in g.outputs() {
                let net = self.net(out)?;
                if net.driver != NetDriver::Gate(i) {
                    return Err(Error::IllegalNetlist(format!(
                        "net {out} is driven by gate {i} but records {:?}",
                        net.driver
                    )));
                }
                if let Some(other) = driven_by[out] {
                    return Err(Error::IllegalNetlist(format!(
                        "net {out} driven by gates {other} and {i}"
                    )));
                }
                driven_by[out] = Some(i);
            }
        }
        for n in &self.nets {
            if let NetDriver::Gate(g) = n.driver {
                if driven_by[n.id] != Some(g) {
                    return Err(Error::IllegalNetlist(format!(
                        "net {} claims driver gate {g} which does not drive it",
                        n.id
                    )));
                }
            }
        }
        let pairs = self.primary_inputs.iter().chain(&self.primary_outputs);
        for p in pairs {
            self.net(p.d1)?;
            self.net(p.d0)?;
        }
        self.check_stateless_loops()
    }

    fn check_stateless_loops(&self) -> Result<()> {
        let stateless = |g: &Gate| match g.spec.kind {
            GateKind::Inverter => true,
            GateKind::Threshold => g.spec.threshold == 1,
            GateKind::Isc => false,
        };
        // 0 = unvisited, 1 = on stack, 2 = done
        let mut mark = vec![0u8; self.gates.len()];
        for start in 0..self.gates.len() {
            if mark[start] != 0 || !stateless(&self.gates[start]) {
                continue;
            }
            let mut stack = vec![(start, 0usize)];
            mark[start] = 1;
            while let Some(&mut (g, ref mut idx)) = stack.last_mut() {
                let gate = &self.gates[g];
                if *idx < gate.inputs.len() {
                    let net = gate.inputs[*idx];
                    *idx += 1;
                    if let NetDriver::Gate(src) = self.nets[net].driver {
                        if !stateless(&self.gates[src]) {
                            continue;
                        }
                        match mark[src] {
                            0 => {
                                mark[src] = 1;
                                stack.push((src, 0));
                            }
                            1 => {
                                return Err(Error::IllegalNetlist(format!(
                                    "combinational loop through gate {src}"
                                )))
                            }
                            _ => {}
                        }
                    }
                } else {
                    mark[g] = 2;
                    stack.pop();
                }
            }
        }
        Ok(())
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        let n: Netlist = serde_json::from_str(s)?;
        n.validate()?;
        Ok(n)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }

    pub fn gates_with(&self, role: Role) -> impl Iterator<Item = &Gate> {
        self.gates.iter().filter(move |g| g.ann.role == role)
    }

    /// Structural summary of how an SR-NCL or DMR-NCL netlist is duplicated.
    pub fn audit_duplication(&self) -> DuplicationAudit {
        let fa_sum = |g: &&Gate| g.spec == GateSpec::th34w2();
        let count = |role: Role, copy: Replica| {
            self.gates
                .iter()
                .filter(|g| g.ann.role == role && g.ann.copy == copy)
                .filter(fa_sum)
                .count()
                / 2
        };
        let isc = |copy: Replica| {
            self.gates
                .iter()
                .filter(|g| g.ann.role == Role::Isc && g.ann.copy == copy)
                .count()
        };
        let lsu_all_shared = self
            .gates_with(Role::ClLsu)
            .all(|g| g.ann.copy == Replica::Shared);
        let mut isomorphic = true;
        for role in [Role::ClMsu, Role::Isc, Role::Reg, Role::Cd] {
            isomorphic &= self.copies_isomorphic(role);
        }
        DuplicationAudit {
            msu_bits: [count(Role::ClMsu, Replica::A), count(Role::ClMsu, Replica::B)],
            lsu_bits: count(Role::ClLsu, Replica::Shared),
            isc_units: [isc(Replica::A), isc(Replica::B)],
            lsu_all_shared,
            copies_isomorphic: isomorphic,
            per_role: self.role_copy_histogram(),
        }
    }

    fn role_copy_histogram(&self) -> BTreeMap<String, usize> {
        let mut m = BTreeMap::new();
        for g in &self.gates {
            *m.entry(format!("{}/{}", g.ann.role, g.ann.copy)).or_insert(0) += 1;
        }
        m
    }

    /// Copies a and b of `role` match gate-for-gate, with inputs either shared
    /// or coming from the corresponding twin.
    fn copies_isomorphic(&self, role: Role) -> bool {
        let of = |c: Replica| -> Vec<&Gate> {
            self.gates
                .iter()
                .filter(|g| g.ann.role == role && g.ann.copy == c)
                .collect()
        };
        let (a, b) = (of(Replica::A), of(Replica::B));
        if a.len() != b.len() {
            return false;
        }
        let twin: HashMap<GateId, GateId> = self
            .gates
            .iter()
            .filter(|g| g.ann.copy == Replica::A)
            .map(|g| g.id)
            .zip(
                self.gates
                    .iter()
                    .filter(|g| g.ann.copy == Replica::B)
                    .map(|g| g.id),
            )
            .collect();
        a.iter().zip(&b).all(|(ga, gb)| {
            ga.spec == gb.spec
                && ga.ann.stage == gb.ann.stage
                && twin.get(&ga.id) == Some(&gb.id)
                && ga.inputs.iter().zip(&gb.inputs).all(|(&na, &nb)| {
                    match (self.nets[na].driver, self.nets[nb].driver) {
                        (NetDriver::Gate(x), NetDriver::Gate(y)) => {
                            x == y || twin.get(&x) == Some(&y)
                        }
                        (da, db) => na == nb || da == db,
                    }
                })
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct DuplicationAudit {
    /// Full-adder sum slices in MSU copies a and b.
    pub msu_bits: [usize; 2],
    pub lsu_bits: usize,
    /// ISC units (one per corrected dual-rail signal) in copies a and b.
    pub isc_units: [usize; 2],
    pub lsu_all_shared: bool,
    pub copies_isomorphic: bool,
    pub per_role: BTreeMap<String, usize>,
}
