use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use std::hint::black_box;

use nalgebra::DMatrix;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha12Rng;
use sombrl::{icem_plan, ICemConfig};

fn quadratic_objective(cands: &[DMatrix<f64>]) -> Vec<f64> {
    cands
        .iter()
        .map(|c| -c.iter().map(|v| (v - 0.3) * (v - 0.3)).sum::<f64>())
        .collect()
}

fn bench_icem(c: &mut Criterion) {
    let mut group = c.benchmark_group("icem_plan");
    for &(population, horizon) in &[(48usize, 10usize), (200, 30)] {
        let cfg = ICemConfig {
            population,
            elites: population / 10,
            iterations: 3,
            horizon,
            ..ICemConfig::default()
        };
        cfg.validate().unwrap();
        let low = vec![-1.0; 2];
        let high = vec![1.0; 2];
        let id = format!("pop{population}_h{horizon}");
        group.bench_with_input(BenchmarkId::from_parameter(id), &cfg, |b, cfg| {
            b.iter(|| {
                let mut rng = ChaCha12Rng::seed_from_u64(5);
                let mut objective = |cands: &[DMatrix<f64>]| quadratic_objective(cands);
                icem_plan(
                    black_box(&mut objective),
                    cfg,
                    &low,
                    &high,
                    None,
                    &mut rng,
                )
                .unwrap()
            });
        });
    }
    group.finish();
}

criterion_group!(benches, bench_icem);
criterion_main!(benches);
