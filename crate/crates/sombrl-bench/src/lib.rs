//! Shared fixtures for the benchmark targets.

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha12Rng;
use sombrl::{Dataset, GpPosterior, KernelFamily, KernelSpec};

/// Inputs uniform on [-1, 1]^d with a smooth vector-valued target plus noise.
pub fn random_dataset(n: usize, input_dim: usize, target_dim: usize, seed: u64) -> Dataset {
    let mut rng = ChaCha12Rng::seed_from_u64(seed);
    let mut data = Dataset::new(input_dim, target_dim, 1e-4);
    for _ in 0..n {
        let x = DVector::from_fn(input_dim, |_, _| rng.random_range(-1.0..1.0));
        let y = DVector::from_fn(target_dim, |j, _| {
            (x.iter().sum::<f64>() + j as f64).sin() + 1e-2 * rng.random_range(-1.0..1.0)
        });
        data.push(x, y).unwrap();
    }
    data
}

pub fn bench_kernel(input_dim: usize) -> KernelSpec {
    KernelSpec::isotropic(KernelFamily::Rbf, input_dim, 0.8, 1.0).unwrap()
}

/// A posterior fitted on `n` random points, ready for prediction benchmarks.
pub fn fitted_posterior(n: usize, input_dim: usize, target_dim: usize) -> GpPosterior {
    let data = random_dataset(n, input_dim, target_dim, 42);
    GpPosterior::fit(&data, &bench_kernel(input_dim)).unwrap()
}

/// Query matrix shaped like one planner timestep batch (input_dim × count).
pub fn query_batch(input_dim: usize, count: usize) -> DMatrix<f64> {
    let mut rng = ChaCha12Rng::seed_from_u64(7);
    DMatrix::from_fn(input_dim, count, |_, _| rng.random_range(-1.0..1.0))
}
