// SPDX-License-Identifier: Apache-2.0

//! Shared fixtures for the Criterion benchmarks in `benches/`.

use srncl_core::metrics::ImageBuffer;
use srncl_core::netlist::{build_dmr_ncl_cla, build_sr_ncl_cla};
use srncl_core::{CompiledNetlist, Operands, PartitionSpec};

pub fn sr(width: usize, lsu: usize) -> CompiledNetlist {
    let n = build_sr_ncl_cla(width, PartitionSpec::new(width, lsu).expect("valid partition"), 1).expect("builds");
    CompiledNetlist::new(n).expect("compiles")
}

pub fn dmr(width: usize) -> CompiledNetlist {
    CompiledNetlist::new(build_dmr_ncl_cla(width, 1).expect("builds")).expect("compiles")
}

pub fn operands(width: usize, count: usize) -> Vec<Operands> {
    Operands::random(width, count, 7)
}

/// Deterministic textured image, `side` x `side`.
pub fn image(side: usize, phase: u32) -> ImageBuffer {
    let data = (0..side * side)
        .map(|i| {
            let (x, y) = ((i % side) as u32, (i / side) as u32);
            ((x * 7 + y * 13 + phase) ^ (x * y)) as u8
        })
        .collect();
    ImageBuffer::new(side, side, data).expect("square buffer")
}
