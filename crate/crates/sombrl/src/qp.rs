//! Projection of GP weight vectors onto a bounded-RKHS-norm ellipsoid.
//!
//! Solves min (α − α_n)ᵀ K(I + K/σ²) (α − α_n) subject to αᵀKα ≤ B². Both
//! matrices are simultaneously diagonalized by an eigendecomposition of K,
//! which reduces the KKT system to a scalar search over the Lagrange
//! multiplier of the single quadratic constraint.

use nalgebra::{DMatrix, DVector, SymmetricEigen};

use crate::error::{Error, Result};
use crate::gp::GpPosterior;

const MAX_BISECTION_ITERS: usize = 100;
const BISECTION_TOL: f64 = 1e-10;
const KKT_TOL: f64 = 1e-6;
/// Eigenvalues below this are treated as the kernel's null space.
const EIG_FLOOR: f64 = 1e-12;

#[derive(Debug, Clone)]
pub struct QpSolution {
    pub alpha: DVector<f64>,
    /// Lagrange multiplier of the norm constraint; 0 when inactive.
    pub multiplier: f64,
    /// Stationarity residual ‖M(α − α_n) + ν K α‖∞ scaled by the problem size.
    pub kkt_residual: f64,
    pub iterations: usize,
}

/// Projects the weight vector of output dimension `dim` so that the implied
/// mean function has RKHS norm at most `b`.
pub fn lipschitz_project(post: &GpPosterior, dim: usize, b: f64) -> Result<QpSolution> {
    if post.train_len() == 0 {
        return Err(Error::Config(
            "norm projection requires a posterior with at least one training point".into(),
        ));
    }
    let k = post.train_kernel_matrix(dim);
    let alpha_n = post.weights(dim);
    project_weights(&k, post.noise_variance(), &alpha_n, b)
}

/// Core solver on an explicit PSD kernel matrix.
pub fn project_weights(
    k: &DMatrix<f64>,
    noise_variance: f64,
    alpha_n: &DVector<f64>,
    b: f64,
) -> Result<QpSolution> {
    let n = k.nrows();
    assert_eq!(k.ncols(), n, "kernel matrix must be square");
    assert_eq!(alpha_n.len(), n, "weight vector length mismatch");
    assert!(noise_variance > 0.0, "noise variance must be positive");
    assert!(b >= 0.0, "norm bound must be nonnegative");

    if b == 0.0 {
        // The feasible set degenerates to the kernel's null space; the origin
        // is the exact minimizer there, no stationarity check applies.
        return Ok(QpSolution {
            alpha: DVector::zeros(n),
            multiplier: 0.0,
            kkt_residual: 0.0,
            iterations: 0,
        });
    }

    let norm_sq = (alpha_n.transpose() * k * alpha_n)[(0, 0)];
    if norm_sq <= b * b {
        return Ok(QpSolution {
            alpha: alpha_n.clone(),
            multiplier: 0.0,
            kkt_residual: 0.0,
            iterations: 0,
        });
    }

    let eig = SymmetricEigen::new(k.clone());
    let lambda: Vec<f64> = eig.eigenvalues.iter().map(|&l| l.max(0.0)).collect();
    let q = eig.eigenvectors;
    let c_n = q.transpose() * alpha_n;

    // For each positive eigenvalue the stationarity condition gives
    // c_i(ν) = c_{n,i} (1 + λ_i/σ²) / (1 + λ_i/σ² + ν); null-space
    // coordinates are untouched by both the objective and the constraint.
    let constraint = |nu: f64| -> f64 {
        lambda
            .iter()
            .zip(c_n.iter())
            .filter(|(&l, _)| l > EIG_FLOOR)
            .map(|(&l, &cn)| {
                let s = 1.0 + l / noise_variance;
                let c = cn * s / (s + nu);
                l * c * c
            })
            .sum()
    };

    let target = b * b;
    let mut lo = 0.0;
    let mut hi = 1.0;
    let mut iterations = 0;
    while constraint(hi) > target && iterations < MAX_BISECTION_ITERS {
        hi *= 2.0;
        iterations += 1;
    }
    while hi - lo > BISECTION_TOL * hi.max(1.0) && iterations < MAX_BISECTION_ITERS {
        let mid = 0.5 * (lo + hi);
        if constraint(mid) > target {
            lo = mid;
        } else {
            hi = mid;
        }
        iterations += 1;
    }
    let nu = 0.5 * (lo + hi);

    let c = DVector::from_fn(n, |i, _| {
        if lambda[i] > EIG_FLOOR {
            let s = 1.0 + lambda[i] / noise_variance;
            c_n[i] * s / (s + nu)
        } else {
            c_n[i]
        }
    });
    let alpha = &q * c;
    let residual = kkt_residual(k, noise_variance, alpha_n, &alpha, nu);
    if residual > KKT_TOL {
        return Err(Error::QpNoConvergence { iterations, residual });
    }
    Ok(QpSolution { alpha, multiplier: nu, kkt_residual: residual, iterations })
}

/// Objective (α − α_n)ᵀ K(I + K/σ²) (α − α_n).
pub fn projection_objective(
    k: &DMatrix<f64>,
    noise_variance: f64,
    alpha_n: &DVector<f64>,
    alpha: &DVector<f64>,
) -> f64 {
    let d = alpha - alpha_n;
    let kd = k * &d;
    (d.transpose() * &kd)[(0, 0)] + kd.dot(&kd) / noise_variance
}

fn kkt_residual(
    k: &DMatrix<f64>,
    noise_variance: f64,
    alpha_n: &DVector<f64>,
    alpha: &DVector<f64>,
    nu: f64,
) -> f64 {
    let d = alpha - alpha_n;
    let kd = k * &d;
    let grad = &kd + k * &kd / noise_variance + k * alpha * nu;
    let scale = alpha_n.amax().max(1.0) * k.amax().max(1.0);
    grad.amax() / scale
}
