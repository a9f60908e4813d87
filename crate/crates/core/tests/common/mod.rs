// SPDX-License-Identifier: Apache-2.0
#![allow(dead_code)]

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use srncl_core::netlist::{build_dmr_ncl_cla, build_ncl_pipeline, build_sr_ncl_cla};
use srncl_core::{CompiledNetlist, Netlist, Operands, PartitionSpec};

pub fn sr(n: usize, l: usize) -> Netlist {
    build_sr_ncl_cla(n, PartitionSpec::new(n, l).unwrap(), 1).unwrap()
}

pub fn dmr(n: usize) -> Netlist {
    build_dmr_ncl_cla(n, 1).unwrap()
}

pub fn ncl(n: usize) -> Netlist {
    build_ncl_pipeline(n, 1).unwrap()
}

pub fn compile(n: Netlist) -> CompiledNetlist {
    CompiledNetlist::new(n).unwrap()
}

pub fn random_operands(width: usize, count: usize, seed: u64) -> Vec<Operands> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mask = (1u64 << width) - 1;
    (0..count)
        .map(|_| Operands::with_carry(rng.gen::<u64>() & mask, rng.gen::<u64>() & mask, rng.gen()))
        .collect()
}

pub fn exhaustive(width: usize) -> Vec<Operands> {
    let n = 1u64 << width;
    let mut v = Vec::with_capacity((n * n * 2) as usize);
    for a in 0..n {
        for b in 0..n {
            for cin in [false, true] {
                v.push(Operands::with_carry(a, b, cin));
            }
        }
    }
    v
}

pub fn sums(ops: &[Operands]) -> Vec<Option<u64>> {
    ops.iter().map(|o| Some(o.sum())).collect()
}
