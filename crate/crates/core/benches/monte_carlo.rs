use std::hint::black_box;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use varac::exec::{map_indexed, Execution};
use varac::harness::{run_training, Experiment, ExperimentConfig};
use varac::mdp::{SoftmaxPolicy, DEFAULT_MAX_EPISODE_STEPS};
use varac::montecarlo::return_moments;
use varac::{models, unbiasedness_check};

const MODES: [(&str, Execution); 2] = [
    ("sequential", Execution::Sequential),
    ("parallel", Execution::Parallel),
];

fn moments(c: &mut Criterion) {
    let m = models::random_proper(7, 5, 3);
    let pi = SoftmaxPolicy::zeros(&m);
    let mut g = c.benchmark_group("return_moments_20k");
    for (name, exec) in MODES {
        g.bench_function(BenchmarkId::from_parameter(name), |b| {
            b.iter(|| return_moments(&m, &pi, 20_000, black_box(1), exec, DEFAULT_MAX_EPISODE_STEPS).unwrap())
        });
    }
    g.finish();
}

fn unbiasedness(c: &mut Criterion) {
    let m = models::geo(0.9);
    let pi = SoftmaxPolicy::zeros(&m);
    let mut g = c.benchmark_group("unbiasedness_20k");
    for (name, exec) in MODES {
        g.bench_function(BenchmarkId::from_parameter(name), |b| {
            b.iter(|| unbiasedness_check(&m, &pi, 0.2, 20_000, black_box(1), exec, DEFAULT_MAX_EPISODE_STEPS).unwrap())
        });
    }
    g.finish();
}

// Independent training runs, one per seed.
fn seed_sweep(c: &mut Criterion) {
    let exp = |seed| {
        let mut cfg = ExperimentConfig::new("geo.json", 0.2, 5_000, "unused.csv");
        cfg.seed = seed;
        Experiment::with_model(models::geo(0.9), cfg).unwrap()
    };
    let runs: Vec<Experiment> = (1..=8).map(exp).collect();
    let mut g = c.benchmark_group("training_sweep_8x5k");
    g.sample_size(10);
    for (name, exec) in MODES {
        g.bench_function(BenchmarkId::from_parameter(name), |b| {
            b.iter(|| map_indexed(exec, runs.len(), |i| run_training(&runs[i]).unwrap().final_theta()[0]))
        });
    }
    g.finish();
}

criterion_group!(benches, moments, unbiasedness, seed_sweep);
criterion_main!(benches);
