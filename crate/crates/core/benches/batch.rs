use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use radwave::estimates::{run_battery, BatteryConfig, EstimateId};
use radwave::lifespan::{sweep, LifespanParams};
use radwave::par::ExecMode;

fn battery(c: &mut Criterion) {
    let mut group = c.benchmark_group("battery");
    group.sample_size(10);
    for mode in [ExecMode::Sequential, ExecMode::Parallel] {
        let cfg = BatteryConfig {
            ids: vec![EstimateId::Kss, EstimateId::SpaceTime, EstimateId::Exterior],
            seeds: (1..=4).collect(),
            horizon: 20.0,
            dr: 0.1,
            order: 1,
            mode,
        };
        group.bench_with_input(BenchmarkId::from_parameter(mode.name()), &cfg, |b, cfg| {
            b.iter(|| run_battery(cfg).unwrap())
        });
    }
    group.finish();
}

fn lifespan_sweep(c: &mut Criterion) {
    let mut group = c.benchmark_group("lifespan_sweep");
    group.sample_size(10);
    let params = LifespanParams {
        dr: 0.02,
        refine: false,
        ..Default::default()
    };
    let eps = [2.1, 2.0, 1.9, 1.8];
    for mode in [ExecMode::Sequential, ExecMode::Parallel] {
        group.bench_with_input(BenchmarkId::from_parameter(mode.name()), &mode, |b, &mode| {
            b.iter(|| sweep(&eps, &params, mode).unwrap())
        });
    }
    group.finish();
}

criterion_group!(benches, battery, lifespan_sweep);
criterion_main!(benches);
