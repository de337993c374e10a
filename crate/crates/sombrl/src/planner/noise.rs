//! Colored-noise sampling for trajectory optimization.
//!
//! Sequences are synthesized in the frequency domain: amplitude of frequency
//! k scales as max(k, 1)^(−β/2) with random Gaussian phases, normalized so
//! every sample has unit marginal variance. Exponent β = 0 recovers white
//! noise; β = 2 gives smooth random-walk-like action sequences that suit
//! underactuated control.

use nalgebra::DMatrix;
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

/// Samples `dims` independent unit-variance colored-noise rows of length
/// `horizon`.
pub fn colored_noise<R: Rng + ?Sized>(
    rng: &mut R,
    exponent: f64,
    dims: usize,
    horizon: usize,
) -> DMatrix<f64> {
    assert!(horizon > 0, "horizon must be positive");
    assert!(exponent >= 0.0, "noise color exponent must be nonnegative");
    let n_freq = horizon / 2 + 1;
    let amplitudes: Vec<f64> = (0..n_freq)
        .map(|k| (k.max(1) as f64).powf(-exponent / 2.0))
        .collect();
    let norm = amplitudes.iter().map(|a| a * a).sum::<f64>().sqrt();

    let mut out = DMatrix::zeros(dims, horizon);
    for d in 0..dims {
        for (k, &a) in amplitudes.iter().enumerate() {
            let cos_amp: f64 = StandardNormal.sample(rng);
            let sin_amp: f64 = StandardNormal.sample(rng);
            let omega = 2.0 * std::f64::consts::PI * k as f64 / horizon as f64;
            for t in 0..horizon {
                let phase = omega * t as f64;
                out[(d, t)] += a * (cos_amp * phase.cos() + sin_amp * phase.sin());
            }
        }
        for t in 0..horizon {
            out[(d, t)] /= norm;
        }
    }
    out
}
