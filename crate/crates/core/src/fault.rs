// SPDX-License-Identifier: Apache-2.0

//! Single-event-upset injection, outcome classification, and campaigns.

use std::collections::BTreeMap;
use std::fmt;
use std::io::Write;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::netlist::{GateId, NetId, Netlist, PartitionSpec, Replica, Role};
use crate::sim::{
    run_pipeline, CompiledNetlist, DelayModel, Injection, MarkerKind, Operands, PipelineRun, RunOptions,
    RunStatus, Time, Trace, UpsetModel,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum Phase {
    Data,
    Null,
}

impl Phase {
    pub const BOTH: [Phase; 2] = [Phase::Data, Phase::Null];

    pub fn as_str(self) -> &'static str {
        match self {
            Phase::Data => "DATA",
            Phase::Null => "NULL",
        }
    }
}

impl fmt::Display for Phase {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Phase {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_uppercase().as_str() {
            "DATA" => Ok(Phase::Data),
            "NULL" => Ok(Phase::Null),
            _ => Err(Error::InvalidParameter(format!("unknown phase {s:?}"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Trigger {
    AtTime(Time),
    /// `offset` time units after the stage enters `phase` for token `token`.
    AtPhase {
        stage: usize,
        phase: Phase,
        token: usize,
        offset: Time,
    },
}

/// `output` selects the rail of two-output gates (0 is D^1).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct FaultSpec {
    pub gate: GateId,
    #[serde(default)]
    pub output: usize,
    pub model: UpsetModel,
    pub trigger: Trigger,
}

/// Which analyzed scenario a site belongs to, and hence which outcomes are
/// acceptable.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum ScenarioTag {
    #[serde(rename = "S1-CaseI")]
    S1CaseI,
    #[serde(rename = "S1-CaseII")]
    S1CaseII,
    #[serde(rename = "S1-CaseIII")]
    S1CaseIII,
    S2,
    ControlPath,
    /// The TH22 merge layer between copies. Not covered by any guarantee.
    Voter,
}

impl ScenarioTag {
    pub const ALL: [ScenarioTag; 6] = [
        ScenarioTag::S1CaseI,
        ScenarioTag::S1CaseII,
        ScenarioTag::S1CaseIII,
        ScenarioTag::S2,
        ScenarioTag::ControlPath,
        ScenarioTag::Voter,
    ];

    pub fn of(role: Role, phase: Phase) -> ScenarioTag {
        match (role, phase) {
            (Role::Cd, _) => ScenarioTag::ControlPath,
            (Role::Merge, _) => ScenarioTag::Voter,
            (_, Phase::Null) => ScenarioTag::S2,
            (Role::ClMsu | Role::Reg, Phase::Data) => ScenarioTag::S1CaseI,
            (Role::ClLsu, Phase::Data) => ScenarioTag::S1CaseII,
            (Role::Isc, Phase::Data) => ScenarioTag::S1CaseIII,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            ScenarioTag::S1CaseI => "S1-CaseI",
            ScenarioTag::S1CaseII => "S1-CaseII",
            ScenarioTag::S1CaseIII => "S1-CaseIII",
            ScenarioTag::S2 => "S2",
            ScenarioTag::ControlPath => "ControlPath",
            ScenarioTag::Voter => "Voter",
        }
    }

    /// Whether `outcome` is within the guarantee for this scenario.
    /// `bound` limits the error of legal approximations.
    pub fn allows(self, outcome: &Outcome, bound: u64) -> bool {
        match self {
            ScenarioTag::Voter => true,
            ScenarioTag::S1CaseII => match outcome {
                Outcome::ExactRecovery => true,
                Outcome::LegalApproximate { error } => *error <= bound,
                _ => false,
            },
            _ => *outcome == Outcome::ExactRecovery,
        }
    }
}

impl fmt::Display for ScenarioTag {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for ScenarioTag {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        ScenarioTag::ALL
            .into_iter()
            .find(|t| t.as_str().eq_ignore_ascii_case(s))
            .ok_or_else(|| Error::InvalidParameter(format!("unknown scenario {s}")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(tag = "kind")]
pub enum Outcome {
    ExactRecovery,
    /// Every output legal, at least one token wrong by up to `error`.
    LegalApproximate { error: u64 },
    IllegalEscape,
    Deadlock,
    Timeout,
}

impl Outcome {
    pub fn name(&self) -> &'static str {
        match self {
            Outcome::ExactRecovery => "ExactRecovery",
            Outcome::LegalApproximate { .. } => "LegalApproximate",
            Outcome::IllegalEscape => "IllegalEscape",
            Outcome::Deadlock => "Deadlock",
            Outcome::Timeout => "Timeout",
        }
    }

    pub fn error(&self) -> u64 {
        match self {
            Outcome::LegalApproximate { error } => *error,
            _ => 0,
        }
    }
}

impl fmt::Display for Outcome {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Classifies a run against the expected sums.
pub fn classify(run: &PipelineRun, expected: &[u64]) -> Outcome {
    match run.status {
        RunStatus::Deadlocked => return Outcome::Deadlock,
        RunStatus::Timeout => return Outcome::Timeout,
        RunStatus::Completed => {}
    }
    if !run.illegal_outputs.is_empty() || run.tokens.len() != expected.len() {
        return Outcome::IllegalEscape;
    }
    let mut worst = 0;
    for (t, &e) in run.tokens.iter().zip(expected) {
        match t.value {
            None => return Outcome::IllegalEscape,
            Some(v) => worst = worst.max(v.abs_diff(e)),
        }
    }
    if worst == 0 {
        Outcome::ExactRecovery
    } else {
        Outcome::LegalApproximate { error: worst }
    }
}

/// Worst-case output error when every LSU sum bit and the LSU carry are wrong.
pub fn error_bound(partition: PartitionSpec) -> u64 {
    (1u64 << (partition.l + 1)) - 1
}

/// One injection site: a gate in a phase of its stage.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct Site {
    pub gate: GateId,
    pub phase: Phase,
    pub stage: usize,
    pub role: Role,
    pub copy: Replica,
    pub tag: ScenarioTag,
}

/// Conjunctive site filter; `None` admits everything.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct SiteFilter {
    #[serde(default)]
    pub roles: Option<Vec<Role>>,
    #[serde(default)]
    pub copies: Option<Vec<Replica>>,
    #[serde(default)]
    pub phases: Option<Vec<Phase>>,
    #[serde(default)]
    pub tags: Option<Vec<ScenarioTag>>,
}

impl SiteFilter {
    pub fn all() -> Self {
        SiteFilter::default()
    }

    /// Every site covered by a guarantee (the merge layer is excluded).
    pub fn guaranteed() -> Self {
        SiteFilter {
            tags: Some(
                ScenarioTag::ALL
                    .into_iter()
                    .filter(|&t| t != ScenarioTag::Voter)
                    .collect(),
            ),
            ..SiteFilter::default()
        }
    }

    pub fn role(mut self, role: Role) -> Self {
        self.roles = Some(vec![role]);
        self
    }

    pub fn copy(mut self, copy: Replica) -> Self {
        self.copies = Some(vec![copy]);
        self
    }

    pub fn phase(mut self, phase: Phase) -> Self {
        self.phases = Some(vec![phase]);
        self
    }

    pub fn admits(&self, site: &Site) -> bool {
        self.roles.as_ref().is_none_or(|r| r.contains(&site.role))
            && self.copies.as_ref().is_none_or(|c| c.contains(&site.copy))
            && self.phases.as_ref().is_none_or(|p| p.contains(&site.phase))
            && self.tags.as_ref().is_none_or(|t| t.contains(&site.tag))
    }
}

/// Every (gate, phase) of a role-annotated pipeline that passes `filter`.
pub fn enumerate_sites(netlist: &Netlist, filter: &SiteFilter) -> Result<Vec<Site>> {
    if netlist.architecture.is_none() || netlist.handshake.is_none() {
        return Err(Error::Annotation(
            "fault sites need a role-annotated pipeline netlist".into(),
        ));
    }
    let mut sites = Vec::new();
    for g in &netlist.gates {
        if g.ann.stage > netlist.stages {
            return Err(Error::Annotation(format!(
                "gate {} has stage {} beyond {}",
                g.id, g.ann.stage, netlist.stages
            )));
        }
        for phase in Phase::BOTH {
            let site = Site {
                gate: g.id,
                phase,
                stage: g.ann.stage,
                role: g.ann.role,
                copy: g.ann.copy,
                tag: ScenarioTag::of(g.ann.role, phase),
            };
            if filter.admits(&site) {
                sites.push(site);
            }
        }
    }
    Ok(sites)
}

/// Half-open interval during which the part of stage `stage` with role
/// `role` holds `phase` of token `token`, read from a fault-free trace.
///
/// Every window closes when the next level has latched the wavefront. DATA
/// opens when the wavefront enters the stage, except for ISC units, which
/// hold DATA only once they have latched it. NULL opens when the stage's
/// outputs are all NULL; for registers, merge and completion gates, when
/// NULL is complete at their inputs.
pub fn phase_window(trace: &Trace, stage: usize, role: Role, phase: Phase, token: usize) -> Option<(Time, Time)> {
    let nth = |level: usize, kind: MarkerKind| trace.markers_at(level, kind).nth(token);
    let (open, close) = match phase {
        Phase::Data => {
            let from = if role == Role::Isc { stage + 1 } else { stage };
            (
                nth(from, MarkerKind::InputsData)?,
                nth(stage + 1, MarkerKind::DataComplete)?,
            )
        }
        Phase::Null => {
            let from = match role {
                Role::ClMsu | Role::ClLsu | Role::Isc => stage + 1,
                Role::Reg | Role::Merge | Role::Cd => stage,
            };
            (
                nth(from, MarkerKind::InputsNull)?,
                nth(stage + 1, MarkerKind::NullComplete)?,
            )
        }
    };
    (open < close).then_some((open, close))
}

/// The stimulus of one experiment: the target operation followed by two
/// flush tokens that toggle every input bit.
pub fn experiment_stimulus(op: Operands, width: usize) -> Vec<Operands> {
    let mask = if width >= 64 { u64::MAX } else { (1u64 << width) - 1 };
    vec![
        op,
        Operands {
            a: !op.a & mask,
            b: !op.b & mask,
            cin: !op.cin,
        },
        Operands {
            a: op.b,
            b: op.a,
            cin: op.cin,
        },
    ]
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ExperimentResult {
    pub outcome: Outcome,
    pub injection_time: Time,
    /// From injection until the consumer finished the next NULL wavefront.
    pub time_to_recover: Option<Time>,
    /// Expected and observed tokens.
    pub evidence: String,
}

/// For every combinational datapath gate, the longest sampled-delay path
/// from its own re-evaluation, through combinational datapath gates, to a
/// latching element (register or ISC). Zero for every other gate.
pub fn settle_times(netlist: &Netlist, delays: &[Time]) -> Vec<Time> {
    let combinational = |g: GateId| matches!(netlist.gates[g].ann.role, Role::ClMsu | Role::ClLsu);
    let mut readers: Vec<Vec<GateId>> = vec![Vec::new(); netlist.nets.len()];
    for g in &netlist.gates {
        for &n in &g.inputs {
            readers[n].push(g.id);
        }
    }
    let mut memo: Vec<Option<Time>> = vec![None; netlist.gates.len()];
    fn visit(
        g: GateId,
        netlist: &Netlist,
        readers: &[Vec<GateId>],
        delays: &[Time],
        comb: &dyn Fn(GateId) -> bool,
        memo: &mut Vec<Option<Time>>,
    ) -> Time {
        if let Some(t) = memo[g] {
            return t;
        }
        // combinational datapath is acyclic; seed to stop on malformed input
        memo[g] = Some(0);
        let mut worst = 0;
        for out in netlist.gates[g].outputs() {
            for &h in &readers[out] {
                if comb(h) {
                    worst = worst.max(delays[h] + visit(h, netlist, readers, delays, comb, memo));
                }
            }
        }
        memo[g] = Some(worst);
        worst
    }
    (0..netlist.gates.len())
        .map(|g| {
            if combinational(g) {
                delays[g] + visit(g, netlist, &readers, delays, &combinational, &mut memo)
            } else {
                0
            }
        })
        .collect()
}

/// Inclusive range of injection times for a site. A NULL-phase upset must
/// also have drained out of the combinational logic before the next level
/// leaves DATA, which is the premise of the NULL-phase analysis.
#[allow(clippy::too_many_arguments)]
pub fn injection_range(
    golden: &Trace,
    stage: usize,
    role: Role,
    phase: Phase,
    token: usize,
    duration: Time,
    settle: Time,
) -> Option<(Time, Time)> {
    let (open, close) = phase_window(golden, stage, role, phase, token)?;
    let margin = duration + if phase == Phase::Null { settle } else { 0 };
    (open + margin <= close).then_some((open, close - margin))
}

fn upset_duration(model: UpsetModel) -> Time {
    match model {
        UpsetModel::OutputInvert { duration } => duration,
        UpsetModel::StateFlip => 1,
    }
}

fn resolve(netlist: &Netlist, fault: &FaultSpec, golden: &Trace, settle: &[Time]) -> Result<Time> {
    match fault.trigger {
        Trigger::AtTime(t) => Ok(t),
        Trigger::AtPhase {
            stage,
            phase,
            token,
            offset,
        } => {
            let role = netlist.gate(fault.gate)?.ann.role;
            let duration = upset_duration(fault.model);
            let (first, last) =
                injection_range(golden, stage, role, phase, token, duration, settle[fault.gate]).ok_or_else(|| {
                    Error::Skipped(format!("stage {stage} has no usable {phase} window for token {token}"))
                })?;
            if first + offset > last {
                return Err(Error::Skipped(format!(
                    "offset {offset} does not fit the {phase} window of stage {stage}"
                )));
            }
            Ok(first + offset)
        }
    }
}

fn experiment_with_golden(
    compiled: &CompiledNetlist,
    operands: &[Operands],
    fault: &FaultSpec,
    delay: &DelayModel,
    golden: &PipelineRun,
    settle: &[Time],
) -> Result<ExperimentResult> {
    let time = resolve(compiled.netlist(), fault, &golden.trace, settle)?;
    let opts = RunOptions {
        injections: vec![Injection {
            time,
            gate: fault.gate,
            output: fault.output,
            model: fault.model,
        }],
        ..RunOptions::default()
    };
    let run = run_pipeline(compiled, operands, delay, &opts)?;
    let expected: Vec<u64> = operands.iter().map(Operands::sum).collect();
    let outcome = classify(&run, &expected);
    let level = compiled.netlist().stages + 1;
    let time_to_recover = run
        .trace
        .markers_at(level, MarkerKind::NullComplete)
        .find(|&t| t > time)
        .map(|t| t - time);
    let evidence = format!(
        "expected {:?} observed {:?} status {:?} illegal_at {:?}",
        expected,
        run.values(),
        run.status,
        run.illegal_outputs.first()
    );
    Ok(ExperimentResult {
        outcome,
        injection_time: time,
        time_to_recover,
        evidence,
    })
}

/// Runs `operands` with one injected upset and classifies the result against
/// integer addition. Phase triggers are resolved on a fault-free run with the
/// same delays; an unreachable trigger yields [`Error::Skipped`].
pub fn run_single_fault_experiment(
    compiled: &CompiledNetlist,
    operands: &[Operands],
    fault: &FaultSpec,
    delay: &DelayModel,
) -> Result<ExperimentResult> {
    let golden = run_pipeline(
        compiled,
        operands,
        delay,
        &RunOptions {
            record_trace: false,
            ..RunOptions::default()
        },
    )?;
    let settle = settle_times(compiled.netlist(), &delay.assign(compiled.netlist().gates.len())?);
    experiment_with_golden(compiled, operands, fault, delay, &golden, &settle)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum FaultKind {
    OutputInvert,
    StateFlip,
}

impl FromStr for FaultKind {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "output-invert" => Ok(FaultKind::OutputInvert),
            "state-flip" => Ok(FaultKind::StateFlip),
            _ => Err(Error::InvalidParameter(format!("unknown upset model {s}"))),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CampaignConfig {
    pub filter: SiteFilter,
    /// One delay assignment per seed.
    pub seeds: Vec<u64>,
    pub d_min: Time,
    pub d_max: Time,
    /// Each experiment uses one of these, chosen from its seed.
    pub models: Vec<FaultKind>,
    /// Output-invert durations are drawn from this closed range.
    pub duration: (Time, Time),
}

impl Default for CampaignConfig {
    fn default() -> Self {
        CampaignConfig {
            filter: SiteFilter::guaranteed(),
            seeds: (0..10).collect(),
            d_min: 1,
            d_max: 8,
            models: vec![FaultKind::OutputInvert, FaultKind::StateFlip],
            duration: (1, 3),
        }
    }
}

impl CampaignConfig {
    pub fn validate(&self) -> Result<()> {
        DelayModel::random(self.d_min, self.d_max, 0).validate()?;
        if self.seeds.is_empty() {
            return Err(Error::InvalidParameter("campaign needs at least one delay seed".into()));
        }
        if self.models.is_empty() {
            return Err(Error::InvalidParameter("campaign needs at least one fault model".into()));
        }
        if self.duration.0 == 0 || self.duration.0 > self.duration.1 {
            return Err(Error::InvalidParameter(format!(
                "upset durations need 1 <= min <= max, got {:?}",
                self.duration
            )));
        }
        Ok(())
    }
}

/// One executed experiment.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CampaignRow {
    pub site_id: GateId,
    pub role: Role,
    pub copy: Replica,
    pub phase: Phase,
    pub scenario: ScenarioTag,
    pub seed: u64,
    pub operand_a: u64,
    pub operand_b: u64,
    pub outcome: String,
    pub error_magnitude: u64,
    pub time_to_recover: Option<Time>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Violation {
    pub site: GateId,
    pub phase: Phase,
    pub scenario: ScenarioTag,
    pub seed: u64,
    pub operands: Operands,
    pub outcome: Outcome,
    pub evidence: String,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ScenarioSummary {
    /// Distinct (gate, phase) sites.
    pub sites: usize,
    pub experiments: usize,
    pub skipped: usize,
    pub outcomes: BTreeMap<String, usize>,
    pub max_error: u64,
    pub violations: Vec<Violation>,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct CampaignReport {
    pub total_sites: usize,
    pub error_bound: Option<u64>,
    pub scenarios: BTreeMap<ScenarioTag, ScenarioSummary>,
    /// Fault-free runs that disagreed with the oracle.
    pub control_failures: Vec<String>,
    #[serde(skip)]
    pub rows: Vec<CampaignRow>,
}

impl CampaignReport {
    pub fn violations(&self) -> impl Iterator<Item = &Violation> {
        self.scenarios.values().flat_map(|s| s.violations.iter())
    }

    pub fn is_clean(&self) -> bool {
        self.control_failures.is_empty() && self.violations().next().is_none()
    }

    pub fn count(&self, outcome: &str) -> usize {
        self.scenarios
            .values()
            .map(|s| s.outcomes.get(outcome).copied().unwrap_or(0))
            .sum()
    }

    pub fn experiments(&self) -> usize {
        self.scenarios.values().map(|s| s.experiments).sum()
    }

    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut out = csv::Writer::from_writer(w);
        out.write_record([
            "site_id",
            "role",
            "copy",
            "phase",
            "scenario",
            "seed",
            "operand_a",
            "operand_b",
            "outcome",
            "error_magnitude",
            "time_to_recover",
        ])?;
        for r in &self.rows {
            out.write_record([
                r.site_id.to_string(),
                r.role.to_string(),
                r.copy.as_str().to_string(),
                r.phase.to_string(),
                r.scenario.to_string(),
                r.seed.to_string(),
                r.operand_a.to_string(),
                r.operand_b.to_string(),
                r.outcome.clone(),
                r.error_magnitude.to_string(),
                r.time_to_recover.map_or(String::new(), |t| t.to_string()),
            ])?;
        }
        out.flush()?;
        Ok(())
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }
}

fn mix(seed: u64, gate: GateId, phase: Phase, op: usize) -> u64 {
    let mut h = seed ^ 0x9E37_79B9_7F4A_7C15;
    for v in [gate as u64, phase as u64, op as u64] {
        h = (h ^ v).wrapping_mul(0xBF58_476D_1CE4_E5B9);
        h ^= h >> 31;
    }
    h
}

struct Task {
    site: Site,
    op: usize,
    seed: usize,
}

/// Sweeps `sites x operands x seeds`, comparing each outcome with its
/// scenario's guarantee. Aggregation is independent of execution order.
pub fn run_campaign(
    compiled: &CompiledNetlist,
    operands: &[Operands],
    config: &CampaignConfig,
) -> Result<CampaignReport> {
    config.validate()?;
    if operands.is_empty() {
        return Err(Error::InvalidParameter("campaign needs at least one operand".into()));
    }
    let netlist = compiled.netlist();
    let sites = enumerate_sites(netlist, &config.filter)?;
    let width = netlist.width;
    let bound = netlist.partition.map(error_bound).unwrap_or(0);
    let stimuli: Vec<Vec<Operands>> = operands.iter().map(|&op| experiment_stimulus(op, width)).collect();
    let delays: Vec<DelayModel> = config
        .seeds
        .iter()
        .map(|&s| DelayModel::random(config.d_min, config.d_max, s))
        .collect();

    let settles: Vec<Vec<Time>> = delays
        .iter()
        .map(|d| Ok(settle_times(netlist, &d.assign(netlist.gates.len())?)))
        .collect::<Result<_>>()?;

    let pairs: Vec<(usize, usize)> = (0..stimuli.len())
        .flat_map(|o| (0..delays.len()).map(move |s| (o, s)))
        .collect();
    let goldens: Vec<PipelineRun> = pairs
        .par_iter()
        .map(|&(o, s)| run_pipeline(compiled, &stimuli[o], &delays[s], &RunOptions::default()))
        .collect::<Result<_>>()?;
    let golden = |o: usize, s: usize| &goldens[o * delays.len() + s];

    let mut report = CampaignReport {
        total_sites: sites.len(),
        error_bound: netlist.partition.map(error_bound),
        ..CampaignReport::default()
    };
    for &(o, s) in &pairs {
        let g = golden(o, s);
        let expected: Vec<u64> = stimuli[o].iter().map(Operands::sum).collect();
        if classify(g, &expected) != Outcome::ExactRecovery {
            report.control_failures.push(format!(
                "seed {} operands {:?}: expected {:?} observed {:?} ({:?})",
                config.seeds[s],
                operands[o],
                expected,
                g.values(),
                g.status
            ));
        }
    }

    let tasks: Vec<Task> = sites
        .iter()
        .flat_map(|&site| {
            (0..stimuli.len()).flat_map(move |op| (0..config.seeds.len()).map(move |seed| Task { site, op, seed }))
        })
        .collect();

    let results: Vec<(usize, Option<ExperimentResult>)> = tasks
        .par_iter()
        .enumerate()
        .map(|(i, t)| {
            let seed = config.seeds[t.seed];
            let g = golden(t.op, t.seed);
            let mut rng = ChaCha8Rng::seed_from_u64(mix(seed, t.site.gate, t.site.phase, t.op));
            let kind = config.models[rng.gen_range(0..config.models.len())];
            let outputs = netlist.gates[t.site.gate].spec.outputs();
            let output = rng.gen_range(0..outputs);
            let (model, duration) = match kind {
                FaultKind::OutputInvert => {
                    let d = rng.gen_range(config.duration.0..=config.duration.1);
                    (UpsetModel::OutputInvert { duration: d }, d)
                }
                FaultKind::StateFlip => (UpsetModel::StateFlip, 1),
            };
            let settle = &settles[t.seed];
            let range = injection_range(
                &g.trace,
                t.site.stage,
                t.site.role,
                t.site.phase,
                0,
                duration,
                settle[t.site.gate],
            );
            let Some((first, last)) = range else {
                return Ok((i, None));
            };
            let offset = rng.gen_range(0..=last - first);
            let fault = FaultSpec {
                gate: t.site.gate,
                output,
                model,
                trigger: Trigger::AtPhase {
                    stage: t.site.stage,
                    phase: t.site.phase,
                    token: 0,
                    offset,
                },
            };
            match experiment_with_golden(compiled, &stimuli[t.op], &fault, &delays[t.seed], g, settle) {
                Ok(r) => Ok((i, Some(r))),
                Err(Error::Skipped(_)) => Ok((i, None)),
                Err(e) => Err(e),
            }
        })
        .collect::<Result<_>>()?;

    let mut site_sets: BTreeMap<ScenarioTag, std::collections::BTreeSet<(GateId, Phase)>> = BTreeMap::new();
    for site in &sites {
        site_sets.entry(site.tag).or_default().insert((site.gate, site.phase));
    }
    for (tag, set) in &site_sets {
        report.scenarios.entry(*tag).or_default().sites = set.len();
    }
    // results are in task order, which depends only on the inputs
    for (i, r) in results {
        let t = &tasks[i];
        let summary = report.scenarios.entry(t.site.tag).or_default();
        let Some(r) = r else {
            summary.skipped += 1;
            continue;
        };
        summary.experiments += 1;
        *summary.outcomes.entry(r.outcome.name().to_string()).or_insert(0) += 1;
        summary.max_error = summary.max_error.max(r.outcome.error());
        let seed = config.seeds[t.seed];
        let op = operands[t.op];
        if !t.site.tag.allows(&r.outcome, bound) {
            summary.violations.push(Violation {
                site: t.site.gate,
                phase: t.site.phase,
                scenario: t.site.tag,
                seed,
                operands: op,
                outcome: r.outcome,
                evidence: r.evidence,
            });
        }
        report.rows.push(CampaignRow {
            site_id: t.site.gate,
            role: t.site.role,
            copy: t.site.copy,
            phase: t.site.phase,
            scenario: t.site.tag,
            seed,
            operand_a: op.a,
            operand_b: op.b,
            outcome: r.outcome.name().to_string(),
            error_magnitude: r.outcome.error(),
            time_to_recover: r.time_to_recover,
        });
    }
    Ok(report)
}

/// Deadlock negative control: a copy of `netlist` in which one request input
/// of a dual-request register rail is tied to 0.
pub fn sever_request(netlist: &Netlist) -> Result<(Netlist, GateId)> {
    let gate = netlist
        .gates
        .iter()
        .find(|g| g.ann.role == Role::Reg && g.inputs.len() == 3)
        .ok_or_else(|| Error::InvalidInput("no dual-request register in netlist".into()))?;
    let mut n = netlist.clone();
    let id = gate.id;
    let tie: NetId = n.nets.len();
    n.nets.push(crate::netlist::Net {
        id: tie,
        driver: crate::netlist::NetDriver::Constant(false),
    });
    n.gates[id].inputs[2] = tie;
    n.validate()?;
    Ok((n, id))
}
