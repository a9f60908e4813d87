// SPDX-License-Identifier: Apache-2.0

//! Settings resolution: command-line flag, then config file, then default.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use srncl_core::netlist::{build_pipeline, Architecture, Netlist, PartitionSpec};
use srncl_core::{DelayModel, Operands};

use crate::{DelayArgs, DesignArgs, Failure, NetlistSource, OperandArgs};

/// Every setting a command accepts, all optional.
#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FileConfig {
    pub out_dir: Option<PathBuf>,
    pub netlist: Option<PathBuf>,
    pub arch: Option<String>,
    pub width: Option<usize>,
    pub lsu: Option<usize>,
    pub stages: Option<usize>,
    pub isc_data1: Option<bool>,
    pub operands: Option<String>,
    pub random: Option<usize>,
    pub operand_seed: Option<u64>,
    pub exhaustive: Option<bool>,
    pub allow_large_exhaustive: Option<bool>,
    pub delay: Option<String>,
    pub d_min: Option<u64>,
    pub d_max: Option<u64>,
    pub delay_seed: Option<u64>,
    pub max_time: Option<u64>,
    pub env_delay: Option<u64>,
    pub seeds: Option<String>,
    pub role: Option<String>,
    pub copy: Option<String>,
    pub phase: Option<String>,
    pub scenario: Option<String>,
    pub include_voter: Option<bool>,
    pub models: Option<String>,
    pub duration_min: Option<u64>,
    pub duration_max: Option<u64>,
    pub designs: Option<Vec<String>>,
    pub costs: Option<PathBuf>,
    pub image_a: Option<PathBuf>,
    pub image_b: Option<PathBuf>,
    pub partitions: Option<Vec<usize>>,
    pub promote_shift: Option<u32>,
    pub average_shift: Option<u32>,
    pub flip_probability: Option<f64>,
    pub flip_seed: Option<u64>,
}

impl FileConfig {
    pub fn load(path: Option<&Path>) -> Result<Self, Failure> {
        let Some(path) = path else {
            return Ok(FileConfig::default());
        };
        let text = std::fs::read_to_string(path)
            .map_err(|e| Failure::config(format!("cannot read config {}: {e}", path.display())))?;
        serde_json::from_str(&text).map_err(|e| Failure::config(format!("bad config {}: {e}", path.display())))
    }
}

pub fn pick<T: Clone>(flag: Option<T>, file: &Option<T>, default: T) -> T {
    flag.or_else(|| file.clone()).unwrap_or(default)
}

fn pick_flag(flag: bool, file: Option<bool>) -> bool {
    flag || file.unwrap_or(false)
}

#[derive(Debug, Clone, Serialize)]
pub struct DesignSettings {
    pub arch: Architecture,
    pub width: usize,
    pub partition: Option<PartitionSpec>,
    pub stages: usize,
    pub isc_data1: bool,
}

impl DesignSettings {
    pub fn resolve(args: &DesignArgs, file: &FileConfig) -> Result<Self, Failure> {
        let arch: Architecture = pick(args.arch.clone(), &file.arch, "sr".into()).parse()?;
        let width = pick(args.width, &file.width, 8);
        let stages = pick(args.stages, &file.stages, 1);
        let lsu = args.lsu.or(file.lsu);
        let partition = match (arch, lsu) {
            (Architecture::Sr, l) => Some(PartitionSpec::new(width, l.unwrap_or(3.min(width.saturating_sub(1)).max(1)))?),
            (_, Some(_)) => return Err(Failure::config("a partition (--lsu) is only valid with --arch sr")),
            (_, None) => None,
        };
        Ok(DesignSettings {
            arch,
            width,
            partition,
            stages,
            isc_data1: pick_flag(args.isc_data1, file.isc_data1),
        })
    }

    pub fn build(&self) -> Result<Netlist, Failure> {
        Ok(build_pipeline(self.arch, self.width, self.partition, self.stages, self.isc_data1)?)
    }
}

/// Loads `--netlist` or builds from design flags; returns the netlist and a
/// description of where it came from.
pub fn netlist_from(src: &NetlistSource, file: &FileConfig) -> Result<(Netlist, serde_json::Value), Failure> {
    if let Some(path) = src.netlist.clone().or_else(|| file.netlist.clone()) {
        let n = Netlist::load(&path).map_err(|e| Failure::config(format!("cannot load netlist {}: {e}", path.display())))?;
        return Ok((n, serde_json::json!({ "netlist": path })));
    }
    let d = DesignSettings::resolve(&src.design, file)?;
    Ok((d.build()?, serde_json::to_value(&d)?))
}

#[derive(Debug, Clone, Serialize)]
#[serde(tag = "source", rename_all = "kebab-case")]
pub enum OperandSource {
    List { operands: Vec<Operands> },
    Random { count: usize, seed: u64 },
    Exhaustive,
}

impl OperandSource {
    pub fn resolve(args: &OperandArgs, file: &FileConfig, default_count: usize) -> Result<Self, Failure> {
        if let Some(list) = args.operands.clone().or_else(|| file.operands.clone()) {
            return Ok(OperandSource::List {
                operands: parse_operands(&list)?,
            });
        }
        if pick_flag(args.exhaustive, file.exhaustive) {
            return Ok(OperandSource::Exhaustive);
        }
        Ok(OperandSource::Random {
            count: pick(args.random, &file.random, default_count),
            seed: pick(args.operand_seed, &file.operand_seed, 0),
        })
    }

    pub fn generate(&self, width: usize, args: &OperandArgs, file: &FileConfig) -> Result<Vec<Operands>, Failure> {
        let ops = match self {
            OperandSource::List { operands } => operands.clone(),
            OperandSource::Random { count, seed } => Operands::random(width, *count, *seed),
            OperandSource::Exhaustive => {
                if width > 8 && !pick_flag(args.allow_large_exhaustive, file.allow_large_exhaustive) {
                    return Err(Failure::config(format!(
                        "exhaustive operands at width {width} need --allow-large-exhaustive"
                    )));
                }
                Operands::exhaustive(width)
            }
        };
        if ops.is_empty() {
            return Err(Failure::config("no operands"));
        }
        let limit = (1u64 << width) - 1;
        if let Some(o) = ops.iter().find(|o| o.a > limit || o.b > limit) {
            return Err(Failure::config(format!("operands {}+{} exceed {width} bits", o.a, o.b)));
        }
        Ok(ops)
    }
}

/// `a+b` or `a+b+cin`, comma-separated.
pub fn parse_operands(s: &str) -> Result<Vec<Operands>, Failure> {
    s.split(',')
        .filter(|t| !t.trim().is_empty())
        .map(|t| {
            let parts: Vec<&str> = t.trim().split('+').map(str::trim).collect();
            let num = |x: &str| x.parse::<u64>().map_err(|_| Failure::config(format!("bad operand {t:?}")));
            match parts.as_slice() {
                [a, b] => Ok(Operands::new(num(a)?, num(b)?)),
                [a, b, c] => match num(c)? {
                    c @ (0 | 1) => Ok(Operands::with_carry(num(a)?, num(b)?, c == 1)),
                    _ => Err(Failure::config(format!("carry-in must be 0 or 1 in {t:?}"))),
                },
                _ => Err(Failure::config(format!("bad operand {t:?}, expected a+b or a+b+cin"))),
            }
        })
        .collect()
}

pub fn delay_from(args: &DelayArgs, file: &FileConfig) -> Result<DelayModel, Failure> {
    let mode = pick(args.delay.clone(), &file.delay, "unit".into());
    let model = match mode.as_str() {
        "unit" => DelayModel::Unit,
        "random" => DelayModel::random(
            pick(args.d_min, &file.d_min, 1),
            pick(args.d_max, &file.d_max, 8),
            pick(args.delay_seed, &file.delay_seed, 0),
        ),
        other => return Err(Failure::config(format!("unknown delay model {other}, expected unit or random"))),
    };
    model.validate()?;
    Ok(model)
}

/// `a..b` (half-open) or a comma-separated list.
pub fn parse_seeds(s: &str) -> Result<Vec<u64>, Failure> {
    let bad = || Failure::config(format!("bad seed list {s:?}"));
    let seeds: Vec<u64> = if let Some((a, b)) = s.split_once("..") {
        let (a, b) = (a.trim().parse::<u64>().map_err(|_| bad())?, b.trim().parse::<u64>().map_err(|_| bad())?);
        (a..b).collect()
    } else {
        s.split(',').map(|t| t.trim().parse().map_err(|_| bad())).collect::<Result<_, _>>()?
    };
    if seeds.is_empty() {
        return Err(bad());
    }
    Ok(seeds)
}

/// Comma-separated list parsed item by item.
pub fn parse_list<T: std::str::FromStr>(s: &str) -> Result<Vec<T>, Failure>
where
    T::Err: std::fmt::Display,
{
    s.split(',')
        .map(str::trim)
        .filter(|t| !t.is_empty())
        .map(|t| t.parse::<T>().map_err(|e| Failure::config(e.to_string())))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn operand_lists() {
        let ops = parse_operands("3+5, 200+55,1+1+1").unwrap();
        assert_eq!(ops[0], Operands::new(3, 5));
        assert_eq!(ops[2], Operands::with_carry(1, 1, true));
        assert!(parse_operands("1+2+3").is_err());
        assert!(parse_operands("x+1").is_err());
    }

    #[test]
    fn seed_lists() {
        assert_eq!(parse_seeds("0..3").unwrap(), vec![0, 1, 2]);
        assert_eq!(parse_seeds("4,9").unwrap(), vec![4, 9]);
        assert!(parse_seeds("3..3").is_err());
    }

    #[test]
    fn flags_beat_file_beat_defaults() {
        let file = FileConfig {
            width: Some(16),
            lsu: Some(5),
            ..FileConfig::default()
        };
        let d = DesignSettings::resolve(&DesignArgs::default(), &file).unwrap();
        assert_eq!((d.width, d.partition.unwrap().l), (16, 5));
        let args = DesignArgs {
            lsu: Some(6),
            ..DesignArgs::default()
        };
        let d = DesignSettings::resolve(&args, &file).unwrap();
        assert_eq!(d.partition.unwrap().l, 6);
        let d = DesignSettings::resolve(&DesignArgs::default(), &FileConfig::default()).unwrap();
        assert_eq!((d.arch, d.width, d.partition.unwrap().l, d.stages), (Architecture::Sr, 8, 3, 1));
    }

    #[test]
    fn partition_needs_sr() {
        let args = DesignArgs {
            arch: Some("dmr".into()),
            lsu: Some(3),
            ..DesignArgs::default()
        };
        assert!(DesignSettings::resolve(&args, &FileConfig::default()).is_err());
    }
}
