//! Benchmarks for the experiment harness: parallel against sequential
//! multi-run execution, and the per-step cost of the online learner at
//! several conduction delays.
//!
//! With the default `parallel` feature the multi-run comparison shows the
//! rayon speedup; built with `--no-default-features` both paths collapse
//! to the same sequential loop.

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use dybm::experiment::{run_many, run_many_serial, run_online, ExperimentConfig, ModelKind};

fn config(d: usize, steps: usize, runs: usize) -> ExperimentConfig {
    ExperimentConfig {
        model: ModelKind::GaussianDybm,
        d,
        mu: 0.5,
        steps,
        runs,
        seed: 11,
        ..ExperimentConfig::default()
    }
}

fn bench_multi_run(c: &mut Criterion) {
    let mut group = c.benchmark_group("noisy_sine_16_runs");
    let config = config(8, 2000, 16);
    group.bench_function("scheduled", |b| {
        b.iter(|| run_many(&config).expect("runs complete"))
    });
    group.bench_function("serial", |b| {
        b.iter(|| run_many_serial(&config).expect("runs complete"))
    });
    group.finish();
}

fn bench_single_run_by_delay(c: &mut Criterion) {
    let mut group = c.benchmark_group("single_run_2000_steps");
    for d in [1usize, 16, 64] {
        let config = config(d, 2000, 1);
        group.bench_with_input(BenchmarkId::from_parameter(d), &config, |b, config| {
            b.iter(|| run_online(config, 0).expect("run completes"))
        });
    }
    group.finish();
}

criterion_group!(benches, bench_multi_run, bench_single_run_by_delay);
criterion_main!(benches);
