// SPDX-License-Identifier: Apache-2.0

use std::path::{Path, PathBuf};

use serde_json::json;
use srncl_core::fault::{run_campaign, CampaignConfig, FaultKind, Phase, ScenarioTag, SiteFilter};
use srncl_core::metrics::{
    compare_designs, process_image_with, write_comparison_csv, Corruption, ImageBuffer, QualityReport, Reconstruction,
};
use srncl_core::netlist::{build_pipeline, count_gates, estimate_transistors, Architecture, GateCostTable, Replica, Role};
use srncl_core::{CompiledNetlist, Netlist, PartitionSpec, RunOptions, RunStatus};

use crate::config::{
    delay_from, netlist_from, parse_list, parse_seeds, pick, DesignSettings, FileConfig, OperandSource,
};
use crate::output::{write_atomic, write_json};
use crate::{CampaignArgs, CompareArgs, Exit, Failure, GenArgs, ImageArgs, SimArgs};

pub struct Context {
    pub file: FileConfig,
    pub out_dir: PathBuf,
}

impl Context {
    fn path(&self, name: &str) -> PathBuf {
        self.out_dir.join(name)
    }
}

fn costs_from(path: Option<&Path>) -> Result<GateCostTable, Failure> {
    let Some(path) = path else {
        return Ok(GateCostTable::default());
    };
    let text = std::fs::read_to_string(path)
        .map_err(|e| Failure::config(format!("cannot read cost table {}: {e}", path.display())))?;
    Ok(GateCostTable::default().with_overrides(&GateCostTable::from_json(&text)?))
}

pub fn gen(ctx: &Context, args: &GenArgs) -> Result<Exit, Failure> {
    let design = DesignSettings::resolve(&args.design, &ctx.file)?;
    let netlist = design.build()?;
    let costs = costs_from(args.costs.as_deref().or(ctx.file.costs.as_deref()))?;
    let out = args.out.clone().unwrap_or_else(|| ctx.path("netlist.json"));
    write_atomic(&out, netlist.to_json()?.as_bytes())?;

    let label = match design.partition {
        Some(p) => format!("{:?}({}, {p})", design.arch, design.width),
        None => format!("{:?}({})", design.arch, design.width),
    };
    println!("{label}: {} gates, {} transistors", netlist.gates.len(), estimate_transistors(&netlist, &costs)?);
    for (kind, n) in count_gates(&netlist) {
        println!("  {kind:<8} {n}");
    }
    if design.arch == Architecture::Sr {
        let audit = netlist.audit_duplication();
        println!(
            "  MSU bits {}/{} (a/b), LSU bits {} shared, ISC units {}/{}",
            audit.msu_bits[0], audit.msu_bits[1], audit.lsu_bits, audit.isc_units[0], audit.isc_units[1]
        );
    }
    println!("wrote {}", out.display());
    Ok(Exit::Ok)
}

pub fn sim(ctx: &Context, args: &SimArgs) -> Result<Exit, Failure> {
    let f = &ctx.file;
    let (netlist, design) = netlist_from(&args.source, f)?;
    let source = OperandSource::resolve(&args.operands, f, 100)?;
    let ops = source.generate(netlist.width, &args.operands, f)?;
    let delay = delay_from(&args.delay, f)?;
    let opts = RunOptions {
        max_time: args.max_time.or(f.max_time),
        env_delay: pick(args.env_delay, &f.env_delay, 1),
        record_trace: args.trace,
        injections: Vec::new(),
    };
    if opts.env_delay == 0 {
        return Err(Failure::config("--env-delay must be >= 1"));
    }
    let compiled = CompiledNetlist::new(netlist)?;
    let run = srncl_core::sim::run_pipeline(&compiled, &ops, &delay, &opts)?;

    let mismatches = ops
        .iter()
        .zip(&run.tokens)
        .filter(|(o, t)| t.value != Some(o.sum()))
        .count()
        + ops.len().saturating_sub(run.tokens.len());
    let settings = json!({
        "design": design,
        "operands": source,
        "delay": delay,
        "max_time": opts.max_time,
        "env_delay": opts.env_delay,
    });
    // values only, so runs under different delays compare byte for byte
    write_json(&ctx.path("tokens.json"), &json!({ "status": run.status, "values": run.values() }))?;
    let mut summary = run.summary_json();
    summary["settings"] = settings;
    summary["transitions"] = json!(run.transitions);
    summary["mismatches"] = json!(mismatches);
    write_json(&ctx.path("summary.json"), &summary)?;
    if args.trace {
        write_atomic(&ctx.path("trace.txt"), run.trace.to_text().as_bytes())?;
    }

    println!(
        "{:?}: {}/{} tokens, {} mismatches, T_DD {}, {} transitions",
        run.status,
        run.tokens.len(),
        ops.len(),
        mismatches,
        run.t_dd.map_or("-".into(), |t| format!("{t:.2}")),
        run.transitions
    );
    Ok(match run.status {
        RunStatus::Timeout => Exit::Timeout,
        RunStatus::Deadlocked => Exit::Deadlock,
        RunStatus::Completed if mismatches > 0 => Exit::OracleMismatch,
        RunStatus::Completed => Exit::Ok,
    })
}

fn campaign_config(args: &CampaignArgs, f: &FileConfig) -> Result<CampaignConfig, Failure> {
    let defaults = CampaignConfig::default();
    let include_voter = args.include_voter || f.include_voter.unwrap_or(false);
    let mut filter = if include_voter {
        SiteFilter::all()
    } else {
        SiteFilter::guaranteed()
    };
    if let Some(s) = args.role.clone().or_else(|| f.role.clone()) {
        filter.roles = Some(parse_list::<Role>(&s)?);
    }
    if let Some(s) = args.copy.clone().or_else(|| f.copy.clone()) {
        filter.copies = Some(parse_list::<Replica>(&s)?);
    }
    if let Some(s) = args.phase.clone().or_else(|| f.phase.clone()) {
        filter.phases = Some(parse_list::<Phase>(&s)?);
    }
    if let Some(s) = args.scenario.clone().or_else(|| f.scenario.clone()) {
        filter.tags = Some(parse_list::<ScenarioTag>(&s)?);
    }
    let seeds = match args.seeds.clone().or_else(|| f.seeds.clone()) {
        Some(s) => parse_seeds(&s)?,
        None => defaults.seeds.clone(),
    };
    let models = match args.models.clone().or_else(|| f.models.clone()) {
        Some(s) => parse_list::<FaultKind>(&s)?,
        None => defaults.models.clone(),
    };
    let cfg = CampaignConfig {
        filter,
        seeds,
        d_min: pick(args.d_min, &f.d_min, defaults.d_min),
        d_max: pick(args.d_max, &f.d_max, defaults.d_max),
        models,
        duration: (
            pick(args.duration_min, &f.duration_min, defaults.duration.0),
            pick(args.duration_max, &f.duration_max, defaults.duration.1),
        ),
    };
    cfg.validate()?;
    Ok(cfg)
}

pub fn campaign(ctx: &Context, args: &CampaignArgs) -> Result<Exit, Failure> {
    let f = &ctx.file;
    let (netlist, design) = netlist_from(&args.source, f)?;
    let source = OperandSource::resolve(&args.operands, f, 10)?;
    let ops = source.generate(netlist.width, &args.operands, f)?;
    let cfg = campaign_config(args, f)?;
    let compiled = CompiledNetlist::new(netlist)?;
    let report = run_campaign(&compiled, &ops, &cfg)?;

    let mut csv = Vec::new();
    report.write_csv(&mut csv)?;
    write_atomic(&ctx.path("campaign.csv"), &csv)?;
    write_json(
        &ctx.path("campaign_summary.json"),
        &json!({
            "settings": { "design": design, "operands": source, "campaign": cfg },
            "report": report,
            "violations": report.violations().count(),
        }),
    )?;

    println!(
        "{} sites, {} experiments, error bound {}",
        report.total_sites,
        report.experiments(),
        report.error_bound.map_or("-".into(), |b| b.to_string())
    );
    for (tag, s) in &report.scenarios {
        let outcomes: Vec<String> = s.outcomes.iter().map(|(k, v)| format!("{k}={v}")).collect();
        println!(
            "  {tag:<11} sites {:>4}  runs {:>6}  skipped {:>5}  max error {:>3}  violations {:>3}  {}",
            s.sites,
            s.experiments,
            s.skipped,
            s.max_error,
            s.violations.len(),
            outcomes.join(" ")
        );
    }
    for c in &report.control_failures {
        println!("  control failure: {c}");
    }
    Ok(if report.is_clean() { Exit::Ok } else { Exit::Violations })
}

/// `ncl8`, `dmr16`, `sr8-5|3`.
fn parse_design(label: &str) -> Result<Netlist, Failure> {
    let bad = || Failure::config(format!("bad design {label:?}, expected e.g. dmr8, ncl16 or sr8-5|3"));
    let lower = label.trim().to_ascii_lowercase();
    let (arch, rest) = ["ncl", "dmr", "sr"]
        .iter()
        .find_map(|a| lower.strip_prefix(a).map(|r| (*a, r)))
        .ok_or_else(bad)?;
    let arch: Architecture = arch.parse()?;
    let (width, partition) = match (arch, rest.split_once('-')) {
        (Architecture::Sr, Some((w, split))) => {
            let w: usize = w.parse().map_err(|_| bad())?;
            let (m, l) = split.split_once('|').ok_or_else(bad)?;
            let (m, l): (usize, usize) = (m.parse().map_err(|_| bad())?, l.parse().map_err(|_| bad())?);
            if m + l != w {
                return Err(Failure::config(format!("{label}: {m}|{l} does not split {w} bits")));
            }
            (w, Some(PartitionSpec::new(w, l)?))
        }
        (Architecture::Sr, None) => return Err(bad()),
        (_, None) => (rest.parse().map_err(|_| bad())?, None),
        (_, Some(_)) => return Err(bad()),
    };
    Ok(build_pipeline(arch, width, partition, 1, false)?)
}

pub fn compare(ctx: &Context, args: &CompareArgs) -> Result<Exit, Failure> {
    let f = &ctx.file;
    let labels = if args.designs.is_empty() {
        f.designs.clone().unwrap_or_else(|| vec!["dmr8".into(), "sr8-5|3".into()])
    } else {
        args.designs.clone()
    };
    let designs = labels
        .iter()
        .map(|l| Ok((l.clone(), parse_design(l)?)))
        .collect::<Result<Vec<_>, Failure>>()?;
    let width = designs[0].1.width;
    let source = OperandSource::resolve(&args.operands, f, 100)?;
    let ops = source.generate(width, &args.operands, f)?;
    let delay = delay_from(&args.delay, f)?;
    let costs = costs_from(args.costs.as_deref().or(f.costs.as_deref()))?;
    let rows = compare_designs(&designs, &ops, &delay, &costs)?;

    let mut csv = Vec::new();
    write_comparison_csv(&rows, &mut csv)?;
    write_atomic(&ctx.path("comparison.csv"), &csv)?;
    write_json(
        &ctx.path("comparison.json"),
        &json!({
            "settings": { "designs": labels, "operands": source, "delay": delay, "costs": costs },
            "rows": rows,
        }),
    )?;
    println!("{:<12} {:>6} {:>11} {:>8} {:>14}", "design", "gates", "transistors", "T_DD", "transitions/op");
    for r in &rows {
        println!(
            "{:<12} {:>6} {:>11} {:>8.2} {:>14.1}",
            r.label, r.gates, r.transistors, r.t_dd_units, r.transitions_per_op
        );
    }
    Ok(Exit::Ok)
}

pub fn image(ctx: &Context, args: &ImageArgs) -> Result<Exit, Failure> {
    let f = &ctx.file;
    let load = |flag: &Option<PathBuf>, file: &Option<PathBuf>, name: &str| -> Result<ImageBuffer, Failure> {
        let path = flag
            .clone()
            .or_else(|| file.clone())
            .ok_or_else(|| Failure::config(format!("missing --{name} image")))?;
        ImageBuffer::load(&path).map_err(|e| Failure::config(format!("cannot read image {}: {e}", path.display())))
    };
    let a = load(&args.a, &f.image_a, "a")?;
    let b = load(&args.b, &f.image_b, "b")?;
    let partitions = pick(args.partitions.clone(), &f.partitions, vec![8, 10, 12, 13, 14]);
    let defaults = Reconstruction::default();
    let corruption = match args.flip_probability.or(f.flip_probability) {
        Some(p) => Corruption::Random {
            p,
            seed: pick(args.flip_seed, &f.flip_seed, 0),
        },
        None => Corruption::Always,
    };
    let recon = Reconstruction {
        promote_shift: pick(args.promote_shift, &f.promote_shift, defaults.promote_shift),
        average_shift: pick(args.average_shift, &f.average_shift, defaults.average_shift),
        corruption,
    };
    let exact_recon = Reconstruction {
        corruption: Corruption::Never,
        ..recon
    };
    let first = PartitionSpec::new(32, *partitions.first().ok_or_else(|| Failure::config("no partitions"))?)?;
    let reference = process_image_with(&a, &b, first, &exact_recon)?;
    write_atomic(&ctx.path("reference.pgm"), &reference.to_pgm_bytes())?;

    let mut results = Vec::new();
    println!("{:>3} {:>6} {:>10} {:>8}  band", "L", "split", "PSNR(dB)", "SSIM");
    for &l in &partitions {
        let p = PartitionSpec::new(32, l)?;
        let img = process_image_with(&a, &b, p, &recon)?;
        let q = QualityReport::compute(&reference, &img)?;
        write_atomic(&ctx.path(&format!("recon_L{l}.pgm")), &img.to_pgm_bytes())?;
        let mut report = serde_json::to_value(q)?;
        report["partition"] = json!(p);
        write_json(&ctx.path(&format!("quality_L{l}.json")), &report)?;
        println!("{l:>3} {:>6} {:>10.2} {:>8.4}  {}", p.to_string(), q.psnr_db, q.ssim, q.band);
        results.push(json!({ "lsu": l, "quality": q }));
    }
    write_json(
        &ctx.path("image_summary.json"),
        &json!({ "settings": { "partitions": partitions, "reconstruction": recon }, "results": results }),
    )?;
    Ok(Exit::Ok)
}
