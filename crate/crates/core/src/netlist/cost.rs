// SPDX-License-Identifier: Apache-2.0

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::Netlist;
use crate::error::{Error, Result};

/// Transistor count per gate kind.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct GateCostTable(pub BTreeMap<String, u64>);

impl Default for GateCostTable {
    /// Static CMOS counts for the common NCL threshold gates. `ISC` is a
    /// behavioral unit; it is costed as two TH33-class rails with forcing logic.
    fn default() -> Self {
        let entries = [
            ("TH12", 6),
            ("TH13", 8),
            ("TH14", 10),
            ("TH22", 12),
            ("TH23", 18),
            ("TH24", 20),
            ("TH33", 16),
            ("TH34", 26),
            ("TH44", 20),
            ("TH23w2", 14),
            ("TH33w2", 18),
            ("TH24w2", 19),
            ("TH34w2", 22),
            ("TH44w2", 23),
            ("INV", 2),
            ("ISC", 32),
            ("ISC1", 32),
        ];
        GateCostTable(entries.iter().map(|(k, v)| (k.to_string(), *v)).collect())
    }
}

impl GateCostTable {
    pub fn from_json(s: &str) -> Result<Self> {
        let t: GateCostTable = serde_json::from_str(s)?;
        if let Some((k, _)) = t.0.iter().find(|(_, &v)| v == 0) {
            return Err(Error::InvalidParameter(format!("cost of {k} must be positive")));
        }
        Ok(t)
    }

    /// Default table with the entries of `overrides` replacing or extending it.
    pub fn with_overrides(mut self, overrides: &GateCostTable) -> Self {
        self.0.extend(overrides.0.iter().map(|(k, v)| (k.clone(), *v)));
        self
    }
}

pub fn count_gates(netlist: &Netlist) -> BTreeMap<String, usize> {
    let mut hist = BTreeMap::new();
    for g in &netlist.gates {
        *hist.entry(g.spec.name()).or_insert(0) += 1;
    }
    hist
}

pub fn estimate_transistors(netlist: &Netlist, costs: &GateCostTable) -> Result<u64> {
    count_gates(netlist)
        .into_iter()
        .map(|(kind, n)| {
            costs
                .0
                .get(&kind)
                .map(|c| c * n as u64)
                .ok_or(Error::MissingCost(kind))
        })
        .sum()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::netlist::{build_dmr_ncl_cla, build_sr_ncl_cla, PartitionSpec};

    fn empty() -> Netlist {
        Netlist {
            width: 0,
            architecture: None,
            partition: None,
            stages: 0,
            gates: vec![],
            nets: vec![],
            primary_inputs: vec![],
            primary_outputs: vec![],
            control_inputs: vec![],
            control_outputs: vec![],
            handshake: None,
            lsu_carry: None,
        }
    }

    #[test]
    fn empty_costs_nothing() {
        assert_eq!(estimate_transistors(&empty(), &GateCostTable::default()).unwrap(), 0);
    }

    #[test]
    fn single_th22() {
        let n = crate::netlist::build_register_stage(1, false).unwrap();
        // one TH22 per rail
        assert_eq!(count_gates(&n).get("TH22"), Some(&2));
        let mut t = GateCostTable(BTreeMap::new());
        t.0.insert("TH22".into(), 12);
        assert_eq!(estimate_transistors(&n, &t).unwrap(), 24);
    }

    #[test]
    fn missing_entry_is_config_error() {
        let n = build_dmr_ncl_cla(4, 1).unwrap();
        let t = GateCostTable(BTreeMap::new());
        assert!(matches!(estimate_transistors(&n, &t), Err(Error::MissingCost(_))));
    }

    #[test]
    fn default_table_covers_built_designs() {
        let t = GateCostTable::default();
        for n in [
            build_dmr_ncl_cla(16, 1).unwrap(),
            build_sr_ncl_cla(16, PartitionSpec::new(16, 5).unwrap(), 1).unwrap(),
        ] {
            estimate_transistors(&n, &t).unwrap();
        }
    }

    #[test]
    fn table_json_is_a_flat_map() {
        let t = GateCostTable::from_json(r#"{"TH22": 10, "INV": 2}"#).unwrap();
        assert_eq!(t.0["TH22"], 10);
        assert!(GateCostTable::from_json(r#"{"TH22": 0}"#).is_err());
        let merged = GateCostTable::default().with_overrides(&t);
        assert_eq!(merged.0["TH22"], 10);
        assert_eq!(merged.0["TH23"], 18);
    }
}
