//! Criterion benchmarks over the data-parallel inner loops.
//!
//! The group names carry the build mode, so results from the default
//! (rayon) build and a `--no-default-features` (sequential) build can be
//! compared side by side:
//!
//! ```text
//! cargo bench -p cpagm
//! cargo bench -p cpagm --no-default-features
//! ```
//!
//! Both builds produce identical numerical results; only throughput
//! differs.

use criterion::{criterion_group, criterion_main, Criterion};
use std::hint::black_box;

use cpagm::cluster::{run, CpagmConfig, ModelKind};
use cpagm::harness::{run_benchmark, BenchmarkConfig, Method, ScenarioId};
use cpagm::models::{fit_global_forest, fit_global_linear, ForestConfig};
use cpagm::simulation::{build_scenario, scenario1, scenario3, SplitPolicy};
use cpagm::types::Dataset;

const MODE: &str = if cfg!(feature = "parallel") {
    "rayon"
} else {
    "sequential"
};

fn scenario1_dataset() -> Dataset {
    build_scenario(&scenario1(100, 10, 42), SplitPolicy::InSample, 4)
        .unwrap()
        .0
}

fn bench_scenario_generation(c: &mut Criterion) {
    let mut group = c.benchmark_group(format!("generate/{MODE}"));
    group.bench_function("scenario1_T100_N10", |b| {
        b.iter(|| black_box(build_scenario(&scenario1(100, 10, 42), SplitPolicy::InSample, 4).unwrap()))
    });
    group.bench_function("scenario3_T200_N10", |b| {
        b.iter(|| black_box(build_scenario(&scenario3(200, 10, 42), SplitPolicy::OutOfSample, 5).unwrap()))
    });
    group.finish();
}

fn bench_cluster_run(c: &mut Criterion) {
    let dataset = scenario1_dataset();
    let mut group = c.benchmark_group(format!("cluster/{MODE}"));
    group.sample_size(20);
    group.bench_function("scenario1_T100_N10_k3_l4", |b| {
        let config = CpagmConfig::new(3, 4).with_seed(7);
        b.iter(|| black_box(run(&dataset, &config).unwrap()))
    });
    group.finish();
}

fn bench_model_fits(c: &mut Criterion) {
    let dataset = scenario1_dataset();
    let windows: Vec<&[f64]> = (0..dataset.len())
        .map(|i| {
            let (s, sp) = dataset.get(i);
            &s.values[sp.train.as_slice_range()]
        })
        .collect();
    let mut group = c.benchmark_group(format!("fit/{MODE}"));
    group.bench_function("pooled_linear_30x92_l4", |b| {
        b.iter(|| black_box(fit_global_linear(&windows, 4).unwrap()))
    });
    group.sample_size(10);
    let forest_cfg = ForestConfig {
        n_trees: 50,
        ..ForestConfig::default()
    };
    group.bench_function("forest_50_trees_30x92_l4", |b| {
        b.iter(|| black_box(fit_global_forest(&windows, 4, &forest_cfg).unwrap()))
    });
    group.finish();
}

fn bench_forest_cluster_run(c: &mut Criterion) {
    let (dataset, _) = build_scenario(&scenario3(100, 4, 42), SplitPolicy::OutOfSample, 5).unwrap();
    let mut group = c.benchmark_group(format!("cluster_forest/{MODE}"));
    group.sample_size(10);
    group.bench_function("scenario3_T100_N4_k3_l5", |b| {
        let mut config = CpagmConfig::new(3, 5)
            .with_seed(7)
            .with_policy(SplitPolicy::OutOfSample)
            .with_model(ModelKind::Forest)
            .with_restarts(2);
        config.forest.n_trees = 30;
        b.iter(|| black_box(run(&dataset, &config).unwrap()))
    });
    group.finish();
}

fn bench_monte_carlo_cell(c: &mut Criterion) {
    let mut group = c.benchmark_group(format!("benchmark_cell/{MODE}"));
    group.sample_size(10);
    group.bench_function("scenario1_T50_N5_4trials", |b| {
        let mut cfg = BenchmarkConfig::new(ScenarioId::S1, 50, 5);
        cfg.trials = 4;
        cfg.restarts = 2;
        cfg.gmap_reps = 5;
        cfg.methods = vec![Method::Cpagm, Method::Lm, Method::Gmfbc, Method::Gmap];
        b.iter(|| black_box(run_benchmark(&cfg).unwrap()))
    });
    group.finish();
}

criterion_group!(
    benches,
    bench_scenario_generation,
    bench_cluster_run,
    bench_model_fits,
    bench_forest_cluster_run,
    bench_monte_carlo_cell
);
criterion_main!(benches);
