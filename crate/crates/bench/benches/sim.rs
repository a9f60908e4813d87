// SPDX-License-Identifier: Apache-2.0

use std::hint::black_box;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion, Throughput};
use srncl_bench::{dmr, image, operands, sr};
use srncl_core::fault::{experiment_stimulus, run_single_fault_experiment, FaultSpec, Phase, Trigger};
use srncl_core::metrics::{process_image, ssim};
use srncl_core::netlist::{build_sr_ncl_cla, Role};
use srncl_core::sim::{run_pipeline, UpsetModel};
use srncl_core::{CompiledNetlist, DelayModel, Operands, PartitionSpec, RunOptions};

fn pipeline(c: &mut Criterion) {
    let mut g = c.benchmark_group("pipeline");
    let tokens = 50;
    g.throughput(Throughput::Elements(tokens as u64));
    for (name, net, width) in [("sr8-5|3", sr(8, 3), 8), ("dmr8", dmr(8), 8), ("sr16-11|5", sr(16, 5), 16)] {
        let ops = operands(width, tokens);
        let delay = DelayModel::random(1, 8, 1);
        g.bench_with_input(BenchmarkId::from_parameter(name), &ops, |b, ops| {
            b.iter(|| run_pipeline(&net, black_box(ops), &delay, &RunOptions::default()).unwrap())
        });
    }
    g.finish();
}

fn compile(c: &mut Criterion) {
    let n = build_sr_ncl_cla(16, PartitionSpec::new(16, 5).unwrap(), 1).unwrap();
    c.bench_function("compile sr16", |b| b.iter(|| CompiledNetlist::new(black_box(n.clone())).unwrap()));
}

fn fault_experiment(c: &mut Criterion) {
    let net = sr(8, 3);
    let gate = net.netlist().gates.iter().find(|g| g.ann.role == Role::ClMsu).unwrap();
    let fault = FaultSpec {
        gate: gate.id,
        output: 0,
        model: UpsetModel::OutputInvert { duration: 2 },
        trigger: Trigger::AtPhase {
            stage: gate.ann.stage,
            phase: Phase::Data,
            token: 0,
            offset: 1,
        },
    };
    let ops = experiment_stimulus(Operands::new(0xA5, 0x3C), 8);
    let delay = DelayModel::random(1, 8, 3);
    c.bench_function("single fault experiment sr8", |b| {
        b.iter(|| run_single_fault_experiment(&net, black_box(&ops), &fault, &delay).unwrap())
    });
}

fn metrics(c: &mut Criterion) {
    let (a, b) = (image(128, 0), image(128, 5));
    let p = PartitionSpec::new(32, 12).unwrap();
    c.bench_function("process_image 128x128", |bench| {
        bench.iter(|| process_image(black_box(&a), black_box(&b), p, true).unwrap())
    });
    c.bench_function("ssim 128x128", |bench| bench.iter(|| ssim(black_box(&a), black_box(&b)).unwrap()));
}

criterion_group!(benches, pipeline, compile, fault_experiment, metrics);
criterion_main!(benches);
