// SPDX-License-Identifier: Apache-2.0

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use super::Time;
use crate::netlist::NetId;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct TraceRecord {
    pub time: Time,
    pub net: NetId,
    pub value: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum MarkerKind {
    /// Every completion detector of the level switched to rfn.
    DataComplete,
    /// Every completion detector of the level switched back to rfd.
    NullComplete,
    /// Every data signal entering the level's registers became DATA.
    InputsData,
    /// Every data signal entering the level's registers returned to NULL.
    InputsNull,
}

/// Wavefront boundary at a register level. Level `stages + 1` is the consumer.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Marker {
    pub time: Time,
    pub level: usize,
    pub kind: MarkerKind,
}

/// The producer put a DATA (`data == true`) or NULL wavefront on the inputs.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Offer {
    pub time: Time,
    pub data: bool,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Trace {
    pub initial: Vec<bool>,
    pub records: Vec<TraceRecord>,
    pub markers: Vec<Marker>,
    pub offers: Vec<Offer>,
}

impl Trace {
    /// `time net_id value` per line.
    pub fn to_text(&self) -> String {
        let mut s = String::with_capacity(self.records.len() * 12);
        for r in &self.records {
            let _ = writeln!(s, "{} {} {}", r.time, r.net, r.value as u8);
        }
        s
    }

    /// Net values after applying every record to the initial state.
    pub fn replay(&self) -> Vec<bool> {
        let mut v = self.initial.clone();
        for r in &self.records {
            v[r.net] = r.value;
        }
        v
    }

    pub fn markers_at(&self, level: usize, kind: MarkerKind) -> impl Iterator<Item = Time> + '_ {
        self.markers
            .iter()
            .filter(move |m| m.level == level && m.kind == kind)
            .map(|m| m.time)
    }

    pub fn data_offers(&self) -> impl Iterator<Item = Time> + '_ {
        self.offers.iter().filter(|o| o.data).map(|o| o.time)
    }
}
