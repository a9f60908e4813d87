// SPDX-License-Identifier: Apache-2.0

//! `srncl`: build, simulate, fault-inject and evaluate NCL adder pipelines.

mod commands;
mod config;
mod output;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

/// Process exit status.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Exit {
    Ok = 0,
    InvalidConfig = 2,
    OracleMismatch = 3,
    Deadlock = 4,
    Timeout = 5,
    Violations = 6,
}

/// An error carrying the exit status it maps to.
#[derive(Debug)]
pub struct Failure {
    pub exit: Exit,
    pub message: String,
}

impl Failure {
    pub fn config(message: impl Into<String>) -> Self {
        Failure {
            exit: Exit::InvalidConfig,
            message: message.into(),
        }
    }
}

impl<E: std::fmt::Display> From<E> for Failure {
    fn from(e: E) -> Self {
        Failure::config(e.to_string())
    }
}

#[derive(Parser, Debug)]
#[command(name = "srncl", version, about = "Selectively-redundant NCL adder simulator and SEU evaluation")]
pub struct Cli {
    /// JSON file of default settings; flags override it.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Directory for output files.
    #[arg(long, global = true, env = "SRNCL_OUT_DIR")]
    pub out_dir: Option<PathBuf>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Build a netlist and write it as JSON.
    Gen(GenArgs),
    /// Run operands through a pipeline and check them against addition.
    Sim(SimArgs),
    /// Inject single upsets and check per-scenario guarantees.
    Campaign(CampaignArgs),
    /// Tabulate size, latency and switching of several designs.
    Compare(CompareArgs),
    /// Two-exposure image reconstruction with a corrupted LSU carry.
    Image(ImageArgs),
}

#[derive(Args, Debug, Clone, Default)]
pub struct DesignArgs {
    /// Architecture: ncl, dmr or sr.
    #[arg(long)]
    pub arch: Option<String>,
    #[arg(long)]
    pub width: Option<usize>,
    /// LSU width L of an sr partition.
    #[arg(long)]
    pub lsu: Option<usize>,
    /// Number of CL stages.
    #[arg(long)]
    pub stages: Option<usize>,
    /// ISC forces illegal DATA to DATA1 instead of DATA0.
    #[arg(long)]
    pub isc_data1: bool,
}

#[derive(Args, Debug, Clone, Default)]
pub struct NetlistSource {
    /// Netlist JSON produced by `gen`; otherwise built from design flags.
    #[arg(long)]
    pub netlist: Option<PathBuf>,
    #[command(flatten)]
    pub design: DesignArgs,
}

#[derive(Args, Debug, Clone, Default)]
pub struct OperandArgs {
    /// Explicit operands, e.g. `3+5,200+55,7+1+1` (optional third term is carry-in).
    #[arg(long)]
    pub operands: Option<String>,
    /// Number of seeded random operands.
    #[arg(long)]
    pub random: Option<usize>,
    #[arg(long)]
    pub operand_seed: Option<u64>,
    /// Every operand pair and carry-in.
    #[arg(long)]
    pub exhaustive: bool,
    /// Permit exhaustive mode above 8 bits.
    #[arg(long)]
    pub allow_large_exhaustive: bool,
}

#[derive(Args, Debug, Clone, Default)]
pub struct DelayArgs {
    /// Delay model: unit or random.
    #[arg(long)]
    pub delay: Option<String>,
    #[arg(long)]
    pub d_min: Option<u64>,
    #[arg(long)]
    pub d_max: Option<u64>,
    #[arg(long)]
    pub delay_seed: Option<u64>,
}

#[derive(Args, Debug)]
pub struct GenArgs {
    #[command(flatten)]
    pub design: DesignArgs,
    /// Output file; defaults to `<out-dir>/netlist.json`.
    #[arg(long, short)]
    pub out: Option<PathBuf>,
    /// Gate cost table JSON overriding the defaults.
    #[arg(long)]
    pub costs: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct SimArgs {
    #[command(flatten)]
    pub source: NetlistSource,
    #[command(flatten)]
    pub operands: OperandArgs,
    #[command(flatten)]
    pub delay: DelayArgs,
    #[arg(long)]
    pub max_time: Option<u64>,
    /// Producer/consumer response delay.
    #[arg(long)]
    pub env_delay: Option<u64>,
    /// Also write the transition trace as `trace.txt`.
    #[arg(long)]
    pub trace: bool,
}

#[derive(Args, Debug)]
pub struct CampaignArgs {
    #[command(flatten)]
    pub source: NetlistSource,
    #[command(flatten)]
    pub operands: OperandArgs,
    /// Delay seeds: `0..10` or `1,4,9`.
    #[arg(long)]
    pub seeds: Option<String>,
    #[arg(long)]
    pub d_min: Option<u64>,
    #[arg(long)]
    pub d_max: Option<u64>,
    /// Restrict to roles (comma-separated), e.g. `CD` or `CL_MSU,REG`.
    #[arg(long)]
    pub role: Option<String>,
    /// Restrict to copies: a, b, shared.
    #[arg(long)]
    pub copy: Option<String>,
    /// Restrict to phases: DATA, NULL.
    #[arg(long)]
    pub phase: Option<String>,
    /// Restrict to scenarios, e.g. `S1-CaseII,S2`.
    #[arg(long)]
    pub scenario: Option<String>,
    /// Also inject into the merge layer, which carries no guarantee.
    #[arg(long)]
    pub include_voter: bool,
    /// Upset models: output-invert, state-flip.
    #[arg(long)]
    pub models: Option<String>,
    #[arg(long)]
    pub duration_min: Option<u64>,
    #[arg(long)]
    pub duration_max: Option<u64>,
}

#[derive(Args, Debug)]
pub struct CompareArgs {
    /// Designs such as `dmr8`, `ncl16`, `sr8-5|3`; comma-separated or repeated.
    #[arg(long = "design", value_delimiter = ',')]
    pub designs: Vec<String>,
    #[command(flatten)]
    pub operands: OperandArgs,
    #[command(flatten)]
    pub delay: DelayArgs,
    #[arg(long)]
    pub costs: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct ImageArgs {
    /// First exposure (binary PGM).
    #[arg(long)]
    pub a: Option<PathBuf>,
    /// Second exposure (binary PGM).
    #[arg(long)]
    pub b: Option<PathBuf>,
    /// LSU widths of the 32-bit adder.
    #[arg(long, value_delimiter = ',')]
    pub partitions: Option<Vec<usize>>,
    #[arg(long)]
    pub promote_shift: Option<u32>,
    #[arg(long)]
    pub average_shift: Option<u32>,
    /// Flip the carry with this probability per addition instead of always.
    #[arg(long)]
    pub flip_probability: Option<f64>,
    #[arg(long)]
    pub flip_seed: Option<u64>,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = config::FileConfig::load(cli.config.as_deref()).and_then(|file| {
        let out_dir = cli
            .out_dir
            .clone()
            .or_else(|| file.out_dir.clone())
            .unwrap_or_else(|| PathBuf::from("."));
        let ctx = commands::Context { file, out_dir };
        match &cli.command {
            Command::Gen(a) => commands::gen(&ctx, a),
            Command::Sim(a) => commands::sim(&ctx, a),
            Command::Campaign(a) => commands::campaign(&ctx, a),
            Command::Compare(a) => commands::compare(&ctx, a),
            Command::Image(a) => commands::image(&ctx, a),
        }
    });
    match result {
        Ok(Exit::Ok) => ExitCode::SUCCESS,
        Ok(code) => ExitCode::from(code as u8),
        Err(f) => {
            eprintln!("srncl: {}", f.message);
            ExitCode::from(f.exit as u8)
        }
    }
}
