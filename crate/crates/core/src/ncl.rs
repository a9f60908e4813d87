// SPDX-License-Identifier: Apache-2.0

//! Dual-rail values and NCL threshold gate semantics.
//!
//! A dual-rail signal is carried on two wires `(d1, d0)`:
//!
//! | d1 d0 | meaning |
//! |-------|---------|
//! | 0 0   | NULL    |
//! | 0 1   | DATA0   |
//! | 1 0   | DATA1   |
//! | 1 1   | illegal |
//!
//! A THmn gate asserts once the weighted count of asserted inputs reaches
//! `m`, deasserts only when every input is deasserted, and otherwise holds
//! its previous output.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
pub struct DualRail {
    pub d1: bool,
    pub d0: bool,
}

/// Classification of a dual-rail pair.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Decoded {
    Bit0,
    Bit1,
    Null,
    Illegal,
}

impl DualRail {
    pub const NULL: DualRail = DualRail { d1: false, d0: false };
    pub const DATA0: DualRail = DualRail { d1: false, d0: true };
    pub const DATA1: DualRail = DualRail { d1: true, d0: false };
    pub const ILLEGAL: DualRail = DualRail { d1: true, d0: true };

    pub fn new(d1: bool, d0: bool) -> Self {
        DualRail { d1, d0 }
    }

    pub fn is_null(self) -> bool {
        !self.d1 && !self.d0
    }

    /// True for DATA0, DATA1 and the illegal state: at least one rail is up.
    pub fn is_asserted(self) -> bool {
        self.d1 || self.d0
    }

    pub fn is_legal_data(self) -> bool {
        self.d1 != self.d0
    }
}

impl fmt::Display for DualRail {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match decode(*self) {
            Decoded::Bit0 => "DATA0",
            Decoded::Bit1 => "DATA1",
            Decoded::Null => "NULL",
            Decoded::Illegal => "ILLEGAL",
        };
        f.write_str(s)
    }
}

pub fn encode_bit(bit: bool) -> DualRail {
    if bit {
        DualRail::DATA1
    } else {
        DualRail::DATA0
    }
}

pub fn decode(v: DualRail) -> Decoded {
    match (v.d1, v.d0) {
        (false, false) => Decoded::Null,
        (false, true) => Decoded::Bit0,
        (true, false) => Decoded::Bit1,
        (true, true) => Decoded::Illegal,
    }
}

/// Encodes the low `width` bits of `value`, LSB first.
pub fn encode_word(value: u64, width: usize) -> Vec<DualRail> {
    (0..width).map(|i| encode_bit((value >> i) & 1 == 1)).collect()
}

/// Decodes an LSB-first word. Returns `None` if any signal is not legal DATA.
pub fn decode_word(signals: &[DualRail]) -> Option<u64> {
    let mut value = 0u64;
    for (i, s) in signals.iter().enumerate() {
        match decode(*s) {
            Decoded::Bit1 => value |= 1 << i,
            Decoded::Bit0 => {}
            Decoded::Null | Decoded::Illegal => return None,
        }
    }
    Some(value)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum GateKind {
    /// Weighted THmn gate with hysteresis.
    Threshold,
    /// Plain inverter, used to shape completion-detection outputs.
    Inverter,
    /// Illegal-state-correction unit. Two outputs `(d1, d0)`; inputs are
    /// `[d1, d0, request...]`.
    Isc,
}

/// Static description of a gate: kind, threshold and per-input weights.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct GateSpec {
    pub kind: GateKind,
    pub threshold: u32,
    pub weights: Vec<u32>,
    /// For ISC units: the DATA value an illegal input is forced to.
    pub illegal_to_one: bool,
}

impl GateSpec {
    /// A THmn gate; `weights.len()` is n.
    pub fn threshold(m: u32, weights: Vec<u32>) -> Result<Self> {
        let total: u32 = weights.iter().sum();
        if weights.is_empty() || weights.contains(&0) || m == 0 || m > total {
            return Err(Error::MalformedGate(format!(
                "threshold {m} with weights {weights:?}"
            )));
        }
        Ok(GateSpec {
            kind: GateKind::Threshold,
            threshold: m,
            weights,
            illegal_to_one: false,
        })
    }

    /// Unit-weight THmn.
    pub fn th(m: u32, n: usize) -> Self {
        Self::threshold(m, vec![1; n]).expect("valid unit-weight gate")
    }

    pub fn inverter() -> Self {
        GateSpec {
            kind: GateKind::Inverter,
            threshold: 1,
            weights: vec![1],
            illegal_to_one: false,
        }
    }

    /// ISC unit with `requests` request inputs (1 or 2).
    pub fn isc(requests: usize, illegal_to_one: bool) -> Self {
        GateSpec {
            kind: GateKind::Isc,
            threshold: 0,
            weights: vec![1; 2 + requests],
            illegal_to_one,
        }
    }

    pub fn th12() -> Self {
        Self::th(1, 2)
    }
    pub fn th22() -> Self {
        Self::th(2, 2)
    }
    pub fn th23() -> Self {
        Self::th(2, 3)
    }
    pub fn th33() -> Self {
        Self::th(3, 3)
    }
    pub fn th44() -> Self {
        Self::th(4, 4)
    }
    pub fn th23w2() -> Self {
        Self::threshold(2, vec![2, 1, 1]).unwrap()
    }
    pub fn th34w2() -> Self {
        Self::threshold(3, vec![2, 1, 1, 1]).unwrap()
    }

    pub fn arity(&self) -> usize {
        self.weights.len()
    }

    pub fn outputs(&self) -> usize {
        if self.kind == GateKind::Isc {
            2
        } else {
            1
        }
    }

    /// Library name, e.g. `TH23`, `TH34w2`, `INV`, `ISC`.
    pub fn name(&self) -> String {
        match self.kind {
            GateKind::Inverter => "INV".to_string(),
            GateKind::Isc if self.illegal_to_one => "ISC1".to_string(),
            GateKind::Isc => "ISC".to_string(),
            GateKind::Threshold => {
                let mut s = format!("TH{}{}", self.threshold, self.weights.len());
                let heavy: Vec<u32> = self.weights.iter().copied().filter(|&w| w > 1).collect();
                if !heavy.is_empty() {
                    s.push('w');
                    for w in heavy {
                        s.push_str(&w.to_string());
                    }
                }
                s
            }
        }
    }

    /// Rebuilds a spec from its serialized form.
    pub fn from_parts(name: &str, m: u32, weights: Vec<u32>) -> Result<Self> {
        match name {
            "INV" => Ok(Self::inverter()),
            "ISC" | "ISC1" => {
                if !(3..=4).contains(&weights.len()) {
                    return Err(Error::MalformedGate(format!(
                        "{name} needs 3 or 4 inputs, got {}",
                        weights.len()
                    )));
                }
                Ok(Self::isc(weights.len() - 2, name == "ISC1"))
            }
            _ if name.starts_with("TH") => {
                let spec = Self::threshold(m, weights)?;
                if spec.name() != name {
                    return Err(Error::MalformedGate(format!(
                        "kind {name} does not match m={} weights={:?}",
                        spec.threshold, spec.weights
                    )));
                }
                Ok(spec)
            }
            _ => Err(Error::MalformedGate(format!("unknown gate kind {name}"))),
        }
    }
}

/// Next output of a single-output gate given its previous output and inputs.
pub fn gate_next_output(spec: &GateSpec, prev: bool, inputs: &[bool]) -> Result<bool> {
    if inputs.len() != spec.arity() {
        return Err(Error::MalformedGate(format!(
            "{} expects {} inputs, got {}",
            spec.name(),
            spec.arity(),
            inputs.len()
        )));
    }
    match spec.kind {
        GateKind::Inverter => Ok(!inputs[0]),
        GateKind::Threshold => {
            let sum: u32 = spec
                .weights
                .iter()
                .zip(inputs)
                .filter(|(_, &x)| x)
                .map(|(w, _)| *w)
                .sum();
            Ok(threshold_step(spec.threshold, sum, prev))
        }
        GateKind::Isc => Err(Error::MalformedGate(
            "ISC has two outputs; use isc_next".to_string(),
        )),
    }
}

#[inline]
pub(crate) fn threshold_step(m: u32, sum: u32, prev: bool) -> bool {
    if sum >= m {
        true
    } else if sum == 0 {
        false
    } else {
        prev
    }
}

/// ISC transfer function.
///
/// Requests are rfd when every request input is 1. Under rfd a NULL unit
/// latches the input, with an illegal input forced to the configured DATA
/// value. Otherwise a NULL input returns the unit to NULL. Every other
/// combination holds.
pub fn isc_next(prev: DualRail, input: DualRail, requests: &[bool], illegal_to_one: bool) -> DualRail {
    let rfd = requests.iter().all(|&r| r);
    if rfd && prev.is_null() {
        if input.d1 && input.d0 {
            encode_bit(illegal_to_one)
        } else {
            input
        }
    } else if !rfd && input.is_null() {
        DualRail::NULL
    } else {
        prev
    }
}
