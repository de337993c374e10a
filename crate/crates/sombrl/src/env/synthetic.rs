//! Synthetic systems whose residual dynamics are drawn from a GP prior.
//!
//! The residual function is a finite kernel expansion f_j(z) = Σ_i w_ij
//! k(z, c_i) with the weights rescaled so every output dimension has RKHS
//! norm exactly equal to the configured bound. Because the model class
//! contains the truth, these systems are the reference point for optimism
//! and regret checks.

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand::RngCore;
use rand::SeedableRng;
use rand_chacha::ChaCha12Rng;
use rand_distr::{Distribution, StandardNormal};

use super::Env;
use crate::error::{Error, Result};
use crate::kernel::KernelSpec;

pub struct SyntheticEnv {
    kernel: KernelSpec,
    centers: Vec<DVector<f64>>,
    /// One weight column per state dimension.
    weights: DMatrix<f64>,
    state_dim: usize,
    action_dim: usize,
    state_clip: f64,
    rkhs_bound: f64,
    pub reset_jitter: f64,
    noise_std: DVector<f64>,
    horizon: usize,
}

impl SyntheticEnv {
    /// Draws a system from the prior induced by `kernel` over z = (x, u).
    pub fn sample(
        kernel: &KernelSpec,
        state_dim: usize,
        action_dim: usize,
        rkhs_bound: f64,
        num_centers: usize,
        horizon: usize,
        noise_std: f64,
        seed: u64,
    ) -> Result<Self> {
        let d_z = state_dim + action_dim;
        if kernel.input_dim != d_z {
            return Err(Error::DimensionMismatch {
                context: "synthetic kernel input dimension".into(),
                expected: d_z,
                got: kernel.input_dim,
            });
        }
        if !(rkhs_bound.is_finite() && rkhs_bound > 0.0) {
            return Err(Error::Config("synthetic rkhs_bound must be positive".into()));
        }
        if num_centers == 0 || horizon == 0 {
            return Err(Error::Config("synthetic num_centers and horizon must be positive".into()));
        }
        let state_clip = 2.0;
        let mut rng = ChaCha12Rng::seed_from_u64(seed);
        let centers: Vec<DVector<f64>> = (0..num_centers)
            .map(|_| {
                DVector::from_fn(d_z, |i, _| {
                    let bound = if i < state_dim { state_clip } else { 1.0 };
                    rng.random_range(-bound..bound)
                })
            })
            .collect();

        let gram = DMatrix::from_fn(num_centers, num_centers, |i, j| {
            kernel.eval(centers[i].as_slice(), centers[j].as_slice())
        });
        let mut weights = DMatrix::from_fn(num_centers, state_dim, |_, _| {
            let w: f64 = StandardNormal.sample(&mut rng);
            w / num_centers as f64
        });
        for j in 0..state_dim {
            let col = weights.column(j).into_owned();
            let norm_sq = (col.transpose() * &gram * &col)[(0, 0)];
            let scale = rkhs_bound / norm_sq.sqrt().max(1e-12);
            weights.column_mut(j).scale_mut(scale);
        }

        Ok(Self {
            kernel: kernel.clone(),
            centers,
            weights,
            state_dim,
            action_dim,
            state_clip,
            rkhs_bound,
            reset_jitter: 0.1,
            noise_std: DVector::from_element(state_dim, noise_std),
            horizon,
        })
    }

    /// The noise-free residual f(z) at z = (x, u).
    pub fn residual_fn(&self, z: &DVector<f64>) -> DVector<f64> {
        let mut out = DVector::zeros(self.state_dim);
        for (i, c) in self.centers.iter().enumerate() {
            let k = self.kernel.eval(z.as_slice(), c.as_slice());
            for j in 0..self.state_dim {
                out[j] += self.weights[(i, j)] * k;
            }
        }
        out
    }

    pub fn rkhs_bound(&self) -> f64 {
        self.rkhs_bound
    }

    pub fn kernel(&self) -> &KernelSpec {
        &self.kernel
    }

    pub fn state_clip(&self) -> f64 {
        self.state_clip
    }
}

impl Env for SyntheticEnv {
    fn name(&self) -> &str {
        "synthetic"
    }

    fn state_dim(&self) -> usize {
        self.state_dim
    }

    fn action_dim(&self) -> usize {
        self.action_dim
    }

    fn action_low(&self) -> DVector<f64> {
        DVector::from_element(self.action_dim, -1.0)
    }

    fn action_high(&self) -> DVector<f64> {
        DVector::from_element(self.action_dim, 1.0)
    }

    fn horizon(&self) -> usize {
        self.horizon
    }

    fn noise_std(&self) -> &DVector<f64> {
        &self.noise_std
    }

    fn r_max(&self) -> f64 {
        1.0
    }

    fn reset(&self, rng: &mut dyn RngCore) -> DVector<f64> {
        let j = self.reset_jitter;
        if j > 0.0 {
            DVector::from_fn(self.state_dim, |_, _| rng.random_range(-j..=j))
        } else {
            DVector::zeros(self.state_dim)
        }
    }

    fn true_dynamics(&self, state: &DVector<f64>, action: &DVector<f64>) -> DVector<f64> {
        let mut z = DVector::zeros(self.state_dim + self.action_dim);
        z.rows_mut(0, self.state_dim).copy_from(state);
        for i in 0..self.action_dim {
            z[self.state_dim + i] = action[i].clamp(-1.0, 1.0);
        }
        let f = self.residual_fn(&z);
        self.wrap(state + f)
    }

    fn reward(&self, state: &DVector<f64>, _action: &DVector<f64>) -> f64 {
        1.0 / (1.0 + state.norm_squared())
    }

    fn wrap(&self, mut state: DVector<f64>) -> DVector<f64> {
        for v in state.iter_mut() {
            *v = v.clamp(-self.state_clip, self.state_clip);
        }
        state
    }
}

#[cfg(test)]
mod tests {
    use approx::assert_abs_diff_eq;
    use rand::SeedableRng;
    use rand_chacha::ChaCha12Rng;

    use super::*;
    use crate::kernel::KernelFamily;

    fn make(seed: u64) -> SyntheticEnv {
        let kernel = KernelSpec::isotropic(KernelFamily::Rbf, 3, 1.0, 1.0).unwrap();
        SyntheticEnv::sample(&kernel, 2, 1, 1.5, 40, 20, 0.01, seed).unwrap()
    }

    #[test]
    fn weights_hit_the_norm_bound_exactly() {
        let env = make(0);
        let gram = DMatrix::from_fn(40, 40, |i, j| {
            env.kernel.eval(env.centers[i].as_slice(), env.centers[j].as_slice())
        });
        for j in 0..2 {
            let col = env.weights.column(j).into_owned();
            let norm_sq = (col.transpose() * &gram * &col)[(0, 0)];
            assert_abs_diff_eq!(norm_sq.sqrt(), 1.5, epsilon = 1e-8);
        }
    }

    #[test]
    fn residual_matches_manual_expansion() {
        let env = make(1);
        let z = DVector::from_vec(vec![0.3, -0.8, 0.5]);
        let f = env.residual_fn(&z);
        for j in 0..2 {
            let manual: f64 = env
                .centers
                .iter()
                .enumerate()
                .map(|(i, c)| env.weights[(i, j)] * env.kernel.eval(z.as_slice(), c.as_slice()))
                .sum();
            assert_abs_diff_eq!(f[j], manual, epsilon = 1e-12);
        }
    }

    #[test]
    fn dynamics_add_the_residual_and_clip() {
        let env = make(2);
        let state = DVector::from_vec(vec![0.2, -0.1]);
        let action = DVector::from_element(1, 0.7);
        let z = DVector::from_vec(vec![0.2, -0.1, 0.7]);
        let expected = env.wrap(&state + env.residual_fn(&z));
        assert_eq!(env.true_dynamics(&state, &action), expected);

        let edge = DVector::from_vec(vec![2.0, 2.0]);
        let next = env.true_dynamics(&edge, &action);
        assert!(next.iter().all(|v| v.abs() <= 2.0));
    }

    #[test]
    fn reward_peaks_at_origin_and_stays_in_range() {
        let env = make(3);
        let origin = DVector::zeros(2);
        assert_eq!(env.reward(&origin, &DVector::zeros(1)), 1.0);
        let mut rng = ChaCha12Rng::seed_from_u64(0);
        for _ in 0..100 {
            use rand::Rng;
            let s = DVector::from_fn(2, |_, _| rng.random_range(-2.0..2.0));
            let r = env.reward(&s, &DVector::zeros(1));
            assert!(r > 0.0 && r <= 1.0);
        }
    }

    #[test]
    fn sampling_is_deterministic_in_the_seed() {
        let a = make(7);
        let b = make(7);
        assert_eq!(a.weights, b.weights);
        assert_eq!(a.centers, b.centers);
        let c = make(8);
        assert_ne!(a.weights, c.weights);
    }

    #[test]
    fn rejects_mismatched_kernel_dimension() {
        let kernel = KernelSpec::isotropic(KernelFamily::Rbf, 2, 1.0, 1.0).unwrap();
        assert!(SyntheticEnv::sample(&kernel, 2, 1, 1.0, 10, 10, 0.0, 0).is_err());
    }
}
