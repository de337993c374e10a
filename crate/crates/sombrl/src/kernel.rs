//! Covariance kernels over state-action inputs.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Kernel family. `Rbf` and `Matern52` are bounded with `k(z, z)` equal to
/// the signal variance; `Linear` grows with the inputs.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum KernelFamily {
    Rbf,
    Linear,
    Matern52,
}

/// Covariance function with one lengthscale per input dimension.
///
/// With `w_i = (z1_i - z2_i) / l_i` and `r² = Σ w_i²`:
///
/// * RBF: `sv · exp(-r²/2)`
/// * Linear: `sv · Σ (z1_i / l_i)(z2_i / l_i)`
/// * Matérn 5/2: `sv · (1 + √5 r + 5r²/3) · exp(-√5 r)`
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KernelSpec {
    pub family: KernelFamily,
    pub lengthscale: Vec<f64>,
    pub signal_variance: f64,
    pub input_dim: usize,
}

impl KernelSpec {
    pub fn new(family: KernelFamily, lengthscale: Vec<f64>, signal_variance: f64) -> Result<Self> {
        let spec = Self {
            family,
            input_dim: lengthscale.len(),
            lengthscale,
            signal_variance,
        };
        spec.validate()?;
        Ok(spec)
    }

    /// Same lengthscale in every input dimension.
    pub fn isotropic(
        family: KernelFamily,
        input_dim: usize,
        lengthscale: f64,
        signal_variance: f64,
    ) -> Result<Self> {
        Self::new(family, vec![lengthscale; input_dim], signal_variance)
    }

    pub fn validate(&self) -> Result<()> {
        if self.lengthscale.len() != self.input_dim {
            return Err(Error::DimensionMismatch {
                context: "kernel lengthscale",
                expected: self.input_dim,
                got: self.lengthscale.len(),
            });
        }
        if self.lengthscale.iter().any(|l| !l.is_finite() || *l <= 0.0) {
            return Err(Error::Config("kernel lengthscales must be finite and > 0".into()));
        }
        if !self.signal_variance.is_finite() || self.signal_variance <= 0.0 {
            return Err(Error::Config("kernel signal_variance must be finite and > 0".into()));
        }
        Ok(())
    }

    /// Evaluates `k(z1, z2)`.
    ///
    /// Panics if either input has the wrong dimension.
    pub fn eval(&self, z1: &[f64], z2: &[f64]) -> f64 {
        assert_eq!(z1.len(), self.input_dim, "kernel input dimension mismatch");
        assert_eq!(z2.len(), self.input_dim, "kernel input dimension mismatch");
        let sv = self.signal_variance;
        match self.family {
            KernelFamily::Rbf => {
                let mut r2 = 0.0;
                for i in 0..self.input_dim {
                    let w = (z1[i] - z2[i]) / self.lengthscale[i];
                    r2 += w * w;
                }
                sv * (-0.5 * r2).exp()
            }
            KernelFamily::Linear => {
                let mut dot = 0.0;
                for i in 0..self.input_dim {
                    let l = self.lengthscale[i];
                    dot += (z1[i] / l) * (z2[i] / l);
                }
                sv * dot
            }
            KernelFamily::Matern52 => {
                let mut r2 = 0.0;
                for i in 0..self.input_dim {
                    let w = (z1[i] - z2[i]) / self.lengthscale[i];
                    r2 += w * w;
                }
                let r = r2.sqrt();
                let sqrt5_r = 5.0_f64.sqrt() * r;
                sv * (1.0 + sqrt5_r + 5.0 * r2 / 3.0) * (-sqrt5_r).exp()
            }
        }
    }

    /// `k(z, z)`: the prior variance at `z`.
    pub fn prior_variance(&self, z: &[f64]) -> f64 {
        match self.family {
            KernelFamily::Rbf | KernelFamily::Matern52 => self.signal_variance,
            KernelFamily::Linear => self.eval(z, z),
        }
    }
}
