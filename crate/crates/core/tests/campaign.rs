// SPDX-License-Identifier: Apache-2.0

mod common;

use common::*;
use srncl_core::fault::{
    enumerate_sites, error_bound, experiment_stimulus, run_campaign, run_single_fault_experiment, sever_request,
    CampaignConfig, FaultKind, FaultSpec, Outcome, Phase, ScenarioTag, SiteFilter, Trigger,
};
use srncl_core::netlist::{Replica, Role};
use srncl_core::sim::{Injection, UpsetModel};
use srncl_core::{DelayModel, Operands, PartitionSpec, RunOptions, RunStatus};

fn quick(filter: SiteFilter) -> CampaignConfig {
    CampaignConfig {
        filter,
        seeds: vec![0, 1],
        ..CampaignConfig::default()
    }
}

#[test]
fn lsu_data_sites_are_case_two() {
    let n = sr(8, 3);
    let sites = enumerate_sites(&n, &SiteFilter::all().role(Role::ClLsu).phase(Phase::Data)).unwrap();
    assert!(!sites.is_empty());
    assert!(sites.iter().all(|s| s.tag == ScenarioTag::S1CaseII && s.copy == Replica::Shared));
}

#[test]
fn cd_sites_are_control_path() {
    let n = sr(8, 3);
    let sites = enumerate_sites(&n, &SiteFilter::all().role(Role::Cd)).unwrap();
    assert!(!sites.is_empty());
    assert!(sites.iter().all(|s| s.tag == ScenarioTag::ControlPath));
    let both: std::collections::BTreeSet<Phase> = sites.iter().map(|s| s.phase).collect();
    assert_eq!(both.len(), 2);
}

#[test]
fn unfiltered_sites_cover_every_gate_twice() {
    for n in [sr(8, 3), dmr(8)] {
        let sites = enumerate_sites(&n, &SiteFilter::all()).unwrap();
        assert_eq!(sites.len(), n.gates.len() * 2);
    }
}

#[test]
fn filters_are_conjunctive() {
    let n = sr(8, 3);
    let f = SiteFilter::all().role(Role::ClMsu).copy(Replica::A).phase(Phase::Null);
    let sites = enumerate_sites(&n, &f).unwrap();
    assert!(!sites.is_empty());
    assert!(sites
        .iter()
        .all(|s| s.role == Role::ClMsu && s.copy == Replica::A && s.phase == Phase::Null && s.tag == ScenarioTag::S2));
}

#[test]
fn bare_adder_is_not_annotated_for_campaigns() {
    let n = srncl_core::netlist::build_ncl_cla(4).unwrap();
    assert!(enumerate_sites(&n, &SiteFilter::all()).is_err());
}

#[test]
fn bounds() {
    let p = |n, l| PartitionSpec::new(n, l).unwrap();
    assert_eq!(error_bound(p(8, 3)), 15);
    assert_eq!(error_bound(p(4, 1)), 3);
    assert!(PartitionSpec::new(8, 0).is_err());
    assert!(PartitionSpec::new(8, 8).is_err());
}

/// Worst-case error when any subset of the `l` LSU sum bits and the carry
/// into the MSU is wrong, by brute force over every corruption pattern.
fn worst_lsu_error(n: usize, l: usize) -> u64 {
    let mut worst = 0;
    for a in 0..1u64 << n {
        for b in 0..1u64 << n {
            let exact = a + b;
            let lmask = (1 << l) - 1;
            let low = (a & lmask) + (b & lmask);
            for pattern in 0..1u64 << (l + 1) {
                let sum_bits = (low & lmask) ^ (pattern & lmask);
                let q = (low >> l) ^ (pattern >> l);
                let got = (((a >> l) + (b >> l) + q) << l) | sum_bits;
                worst = worst.max(got.abs_diff(exact));
            }
        }
    }
    worst
}

#[test]
fn bound_is_tight_by_exhaustive_sweep() {
    let p = |n, l| PartitionSpec::new(n, l).unwrap();
    assert_eq!(worst_lsu_error(8, 3), error_bound(p(8, 3)));
    assert_eq!(worst_lsu_error(4, 1), error_bound(p(4, 1)));
    assert_eq!(worst_lsu_error(4, 2), error_bound(p(4, 2)));
}

fn single(netlist: &srncl_core::Netlist, role: Role, copy: Replica, phase: Phase) -> Vec<Outcome> {
    let c = compile(netlist.clone());
    let ops = experiment_stimulus(Operands::new(0xB7, 0x5C), netlist.width);
    let delay = DelayModel::random(1, 8, 3);
    let sites = enumerate_sites(netlist, &SiteFilter::all().role(role).copy(copy).phase(phase)).unwrap();
    let mut out = Vec::new();
    for (i, s) in sites.iter().enumerate().step_by(3) {
        let fault = FaultSpec {
            gate: s.gate,
            output: 0,
            model: if i % 2 == 0 {
                UpsetModel::OutputInvert { duration: 2 }
            } else {
                UpsetModel::StateFlip
            },
            trigger: Trigger::AtPhase {
                stage: s.stage,
                phase,
                token: 0,
                offset: 0,
            },
        };
        match run_single_fault_experiment(&c, &ops, &fault, &delay) {
            Ok(r) => out.push(r.outcome),
            Err(srncl_core::Error::Skipped(_)) => {}
            Err(e) => panic!("{e}"),
        }
    }
    assert!(!out.is_empty());
    out
}

#[test]
fn msu_copy_a_in_data_recovers() {
    let outcomes = single(&sr(8, 3), Role::ClMsu, Replica::A, Phase::Data);
    assert!(outcomes.iter().all(|o| *o == Outcome::ExactRecovery), "{outcomes:?}");
}

#[test]
fn lsu_in_data_stays_legal() {
    let bound = error_bound(PartitionSpec::new(8, 3).unwrap());
    for o in single(&sr(8, 3), Role::ClLsu, Replica::Shared, Phase::Data) {
        assert!(ScenarioTag::S1CaseII.allows(&o, bound), "{o:?}");
    }
}

#[test]
fn datapath_in_null_recovers() {
    for role in [Role::ClMsu, Role::Reg] {
        for o in single(&sr(8, 3), role, Replica::B, Phase::Null) {
            assert_eq!(o, Outcome::ExactRecovery);
        }
    }
}

#[test]
fn premature_request_is_absorbed() {
    for phase in Phase::BOTH {
        for o in single(&sr(8, 3), Role::Cd, Replica::A, phase) {
            assert_eq!(o, Outcome::ExactRecovery);
        }
    }
}

#[test]
fn at_time_trigger_and_zero_duration() {
    let n = sr(8, 3);
    let c = compile(n.clone());
    let ops = experiment_stimulus(Operands::new(1, 2), 8);
    let gate = n.gates.iter().position(|g| g.ann.role == Role::ClMsu).unwrap();
    let mut fault = FaultSpec {
        gate,
        output: 0,
        model: UpsetModel::OutputInvert { duration: 0 },
        trigger: Trigger::AtTime(10),
    };
    assert!(run_single_fault_experiment(&c, &ops, &fault, &DelayModel::Unit).is_err());
    fault.model = UpsetModel::OutputInvert { duration: 1 };
    let r = run_single_fault_experiment(&c, &ops, &fault, &DelayModel::Unit).unwrap();
    assert_eq!(r.injection_time, 10);

    // a trigger on a token that is never offered cannot be resolved
    fault.trigger = Trigger::AtPhase {
        stage: 0,
        phase: Phase::Data,
        token: 99,
        offset: 0,
    };
    assert!(matches!(
        run_single_fault_experiment(&c, &ops, &fault, &DelayModel::Unit),
        Err(srncl_core::Error::Skipped(_))
    ));
}

#[test]
fn engine_accepts_multiple_injections() {
    let c = compile(dmr(8));
    let ops = random_operands(8, 3, 3);
    let gates: Vec<usize> = c
        .netlist()
        .gates
        .iter()
        .filter(|g| g.ann.role == Role::ClMsu && g.ann.copy == Replica::A)
        .map(|g| g.id)
        .take(2)
        .collect();
    let opts = RunOptions {
        injections: gates
            .iter()
            .enumerate()
            .map(|(i, &gate)| Injection {
                time: 15 + i as u64,
                gate,
                output: 0,
                model: UpsetModel::OutputInvert { duration: 2 },
            })
            .collect(),
        ..RunOptions::default()
    };
    let run = srncl_core::sim::run_pipeline(&c, &ops, &DelayModel::Unit, &opts).unwrap();
    assert_ne!(run.status, RunStatus::Timeout);
}

#[test]
fn lsu_campaign_respects_bound_and_report_invariants() {
    let n = sr(8, 3);
    let c = compile(n);
    let ops = random_operands(8, 6, 11);
    let cfg = quick(SiteFilter::all().role(Role::ClLsu));
    let report = run_campaign(&c, &ops, &cfg).unwrap();
    assert!(report.control_failures.is_empty());
    assert!(report.is_clean(), "{:?}", report.violations().collect::<Vec<_>>());
    assert_eq!(report.error_bound, Some(15));
    let sum: usize = report.scenarios.values().map(|s| s.sites).sum();
    assert_eq!(sum, report.total_sites);
    let case2 = &report.scenarios[&ScenarioTag::S1CaseII];
    assert!(case2.max_error <= 15);
    assert_eq!(report.count("Deadlock") + report.count("IllegalEscape") + report.count("Timeout"), 0);
    let per: usize = report.scenarios.values().map(|s| s.experiments + s.skipped).sum();
    assert_eq!(per, report.total_sites * ops.len() * cfg.seeds.len());

    let mut csv = Vec::new();
    report.write_csv(&mut csv).unwrap();
    let text = String::from_utf8(csv).unwrap();
    assert!(text.starts_with(
        "site_id,role,copy,phase,scenario,seed,operand_a,operand_b,outcome,error_magnitude,time_to_recover\n"
    ));
    assert_eq!(text.lines().count(), report.experiments() + 1);
}

#[test]
fn campaigns_are_deterministic() {
    let c = compile(sr(8, 3));
    let ops = random_operands(8, 3, 12);
    let cfg = quick(SiteFilter::all().role(Role::Isc));
    let a = run_campaign(&c, &ops, &cfg).unwrap();
    let b = run_campaign(&c, &ops, &cfg).unwrap();
    assert_eq!(a.to_json().unwrap(), b.to_json().unwrap());
    let (mut x, mut y) = (Vec::new(), Vec::new());
    a.write_csv(&mut x).unwrap();
    b.write_csv(&mut y).unwrap();
    assert_eq!(x, y);
}

#[test]
fn dmr_datapath_sweep_recovers() {
    let c = compile(dmr(8));
    let ops = random_operands(8, 3, 13);
    for role in [Role::ClMsu, Role::Reg] {
        let report = run_campaign(&c, &ops, &quick(SiteFilter::guaranteed().role(role))).unwrap();
        assert!(report.is_clean());
        assert_eq!(report.count("ExactRecovery"), report.experiments());
    }
}

#[test]
fn severed_netlist_fails_the_control() {
    let (broken, _) = sever_request(&sr(8, 3)).unwrap();
    let c = compile(broken);
    let cfg = CampaignConfig {
        filter: SiteFilter::all().role(Role::Cd).copy(Replica::A),
        seeds: vec![0],
        models: vec![FaultKind::StateFlip],
        ..CampaignConfig::default()
    };
    let report = run_campaign(&c, &[Operands::new(1, 1)], &cfg).unwrap();
    assert!(!report.control_failures.is_empty());
    assert!(!report.is_clean());
}

#[test]
fn campaign_rejects_bad_config() {
    let c = compile(sr(8, 3));
    let ops = [Operands::new(1, 1)];
    assert!(run_campaign(&c, &[], &CampaignConfig::default()).is_err());
    let bad = CampaignConfig {
        d_min: 0,
        ..CampaignConfig::default()
    };
    assert!(run_campaign(&c, &ops, &bad).is_err());
    let bad = CampaignConfig {
        models: vec![],
        ..CampaignConfig::default()
    };
    assert!(run_campaign(&c, &ops, &bad).is_err());
}
