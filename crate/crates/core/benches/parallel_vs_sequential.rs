use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use std::hint::black_box;

use iwes::env::PointMassTask;
use iwes::es::{estimate_gradient_vanilla, BatchRecord, FitnessShaping, PopulationConfig};
use iwes::iw::{compute_log_weight, compute_log_weight_direct, compute_weights};
use iwes::noise::NoiseTable;
use iwes::pool::{available_workers, evaluate_batch, WorkerPool};
use iwes::rng::stream;
use rand::Rng;

const DIM: usize = 266_242; // 4 -> 512 -> 512 -> 2 policy
const PAIRS: usize = 32;

fn setup() -> (NoiseTable, BatchRecord, Vec<f64>) {
    let table = NoiseTable::build(0, 2_000_000, DIM).unwrap();
    let mut rng = stream(1, 0);
    let handles = table.sample_handles(&mut rng, PAIRS, DIM, true);
    let returns: Vec<f64> = (0..handles.len()).map(|_| rng.gen_range(-1.0..1.0)).collect();
    let batch = BatchRecord::new(vec![0.0; DIM], handles, returns, FitnessShaping::CenteredRank, 0).unwrap();
    let moved: Vec<f64> = (0..DIM).map(|_| rng.gen_range(-1e-4..1e-4)).collect();
    (table, batch, moved)
}

fn pools() -> Vec<(&'static str, WorkerPool)> {
    vec![
        ("sequential", WorkerPool::sequential()),
        ("parallel", WorkerPool::new(available_workers().max(2)).unwrap()),
    ]
}

fn bench_weights(c: &mut Criterion) {
    let (table, batch, moved) = setup();
    let mut group = c.benchmark_group("importance_weights");
    group.sample_size(10);
    for (name, pool) in pools() {
        group.bench_function(BenchmarkId::new("compute_weights", name), |b| {
            b.iter(|| compute_weights(black_box(&batch), black_box(&moved), 0.02, &table, &pool, 1e-8).unwrap())
        });
    }
    let h = batch.handles[0];
    group.bench_function("log_weight_prefix_denominator", |b| {
        b.iter(|| compute_log_weight(&h, &batch.base_params, black_box(&moved), 0.02, &table).unwrap())
    });
    group.bench_function("log_weight_direct_denominator", |b| {
        b.iter(|| compute_log_weight_direct(&h, &batch.base_params, black_box(&moved), 0.02, &table).unwrap())
    });
    group.finish();
}

fn bench_gradient(c: &mut Criterion) {
    let (table, batch, _) = setup();
    let cfg = PopulationConfig::default();
    let mut group = c.benchmark_group("vanilla_gradient");
    group.sample_size(10);
    for (name, pool) in pools() {
        group.bench_function(name, |b| b.iter(|| estimate_gradient_vanilla(black_box(&batch), &cfg, &table, &pool)));
    }
    group.finish();
}

fn bench_rollouts(c: &mut Criterion) {
    let task = PointMassTask::new(64, 50);
    let dim = task.policy.param_count();
    let table = NoiseTable::build(0, 1_000_000, dim).unwrap();
    let handles = table.sample_handles(&mut stream(2, 0), PAIRS, dim, true);
    let theta = task.policy.init_params(&mut stream(3, 0));
    let mut group = c.benchmark_group("evaluate_batch");
    group.sample_size(10);
    for (name, pool) in pools() {
        group.bench_function(name, |b| {
            b.iter(|| evaluate_batch(&pool, black_box(&theta), &handles, 0.02, &table, &task, 7, 0).unwrap())
        });
    }
    group.finish();
}

criterion_group!(benches, bench_weights, bench_gradient, bench_rollouts);
criterion_main!(benches);
