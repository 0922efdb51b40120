use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use mdshrink::linalg::sym_eig;
use mdshrink::sim::{run_spiked_experiment_with, SpikedExperimentConfig};
use mdshrink::{Execution, Mat};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

fn spiked(c: &mut Criterion) {
    let cfg = SpikedExperimentConfig {
        n: 200,
        beta_grid: vec![0.5, 1.0],
        spikes: vec![2.0, 1.0],
        sigma_grid: vec![0.45, 0.9],
        reps: 8,
        ..Default::default()
    };
    let mut group = c.benchmark_group("spiked_experiment");
    group.sample_size(10);
    for exec in [Execution::Sequential, Execution::Parallel] {
        group.bench_function(BenchmarkId::from_parameter(format!("{exec:?}")), |b| {
            b.iter(|| run_spiked_experiment_with(&cfg, exec).unwrap())
        });
    }
    group.finish();
}

fn eigen(c: &mut Criterion) {
    let mut group = c.benchmark_group("sym_eig");
    group.sample_size(10);
    for p in [100usize, 300, 600] {
        let mut rng = ChaCha8Rng::seed_from_u64(p as u64);
        let g = Mat::<f64>::from_fn(p, p, |_, _| StandardNormal.sample(&mut rng));
        let s = &g * g.transpose();
        group.bench_with_input(BenchmarkId::from_parameter(p), &s, |b, s| {
            b.iter(|| sym_eig(s.as_ref()).unwrap())
        });
    }
    group.finish();
}

criterion_group!(benches, spiked, eigen);
criterion_main!(benches);
