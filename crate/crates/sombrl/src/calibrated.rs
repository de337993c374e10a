//! Calibrated dynamics model: GP posteriors plus a confidence-width schedule.
//!
//! The model tracks an episode counter, refits the posterior as transition
//! data arrives, optionally re-tunes kernel hyperparameters on a cadence, and
//! exposes per-dimension confidence intervals [μ_j − βσ_j, μ_j + βσ_j].

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::gp::{Dataset, GpPosterior, DEFAULT_DATA_CAP};
use crate::hyperfit::{fit_hyperparameters, HyperBounds, HyperFitOptions, MIN_FIT_POINTS};
use crate::kernel::KernelSpec;
use crate::qp::lipschitz_project;

/// Schedule for the confidence-interval width β_n.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "snake_case")]
pub enum BetaSchedule {
    Fixed { value: f64 },
    /// β_n = B + σ √(2 (Γ_n + ln(1/δ))) with Γ_n the information gain of the
    /// data collected so far.
    Theory { rkhs_bound: f64, noise_std: f64, delta: f64 },
}

impl Default for BetaSchedule {
    fn default() -> Self {
        BetaSchedule::Fixed { value: 2.0 }
    }
}

impl BetaSchedule {
    pub fn validate(&self) -> Result<()> {
        match self {
            BetaSchedule::Fixed { value } => {
                if !(value.is_finite() && *value > 0.0) {
                    return Err(Error::Config("beta schedule: fixed value must be positive".into()));
                }
            }
            BetaSchedule::Theory { rkhs_bound, noise_std, delta } => {
                if !(rkhs_bound.is_finite() && *rkhs_bound > 0.0) {
                    return Err(Error::Config("beta schedule: rkhs_bound must be positive".into()));
                }
                if !(noise_std.is_finite() && *noise_std > 0.0) {
                    return Err(Error::Config("beta schedule: noise_std must be positive".into()));
                }
                if !(*delta > 0.0 && *delta <= 1.0) {
                    return Err(Error::Config("beta schedule: delta must lie in (0, 1]".into()));
                }
            }
        }
        Ok(())
    }
}

/// Width β_n for episode `n` given the information gain of the data so far.
pub fn beta_schedule(schedule: &BetaSchedule, _n: usize, gamma_n: f64) -> f64 {
    match schedule {
        BetaSchedule::Fixed { value } => *value,
        BetaSchedule::Theory { rkhs_bound, noise_std, delta } => {
            let gain = gamma_n.max(0.0);
            rkhs_bound + noise_std * (2.0 * (gain + (1.0 / delta).ln())).sqrt()
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelConfig {
    /// Initial kernel shared by every output dimension.
    pub kernel: KernelSpec,
    pub output_dim: usize,
    pub noise_variance: f64,
    pub beta: BetaSchedule,
    pub data_cap: usize,
    /// Re-tune kernel hyperparameters every this many updates; `None` keeps
    /// the initial kernel.
    pub refit_every: Option<usize>,
    /// Data subsample size used during hyperparameter fitting.
    pub refit_subsample: usize,
    pub hyper_bounds: HyperBounds,
    /// `Some(B)` projects each dimension's weights onto the RKHS ball of
    /// radius B after every refit.
    pub rkhs_bound: Option<f64>,
}

impl ModelConfig {
    pub fn new(kernel: KernelSpec, output_dim: usize, noise_variance: f64) -> Self {
        Self {
            kernel,
            output_dim,
            noise_variance,
            beta: BetaSchedule::default(),
            data_cap: DEFAULT_DATA_CAP,
            refit_every: None,
            refit_subsample: 256,
            hyper_bounds: HyperBounds::default(),
            rkhs_bound: None,
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.kernel
            .validate()
            .map_err(|e| Error::Config(format!("model kernel: {e}")))?;
        if self.output_dim == 0 {
            return Err(Error::Config("model output_dim must be positive".into()));
        }
        if !(self.noise_variance.is_finite() && self.noise_variance > 0.0) {
            return Err(Error::Config("model noise_variance must be positive".into()));
        }
        self.beta.validate()?;
        if self.data_cap == 0 {
            return Err(Error::Config("model data_cap must be positive".into()));
        }
        if self.refit_every == Some(0) {
            return Err(Error::Config("model refit_every must be positive when set".into()));
        }
        if self.refit_subsample < MIN_FIT_POINTS {
            return Err(Error::Config(format!(
                "model refit_subsample must be at least {MIN_FIT_POINTS}"
            )));
        }
        self.hyper_bounds
            .validate()
            .map_err(Error::Config)?;
        if let Some(b) = self.rkhs_bound {
            if !(b.is_finite() && b >= 0.0) {
                return Err(Error::Config("model rkhs_bound must be nonnegative".into()));
            }
        }
        Ok(())
    }
}

/// GP dynamics model with an episode-indexed confidence width.
#[derive(Debug, Clone)]
pub struct CalibratedModel {
    cfg: ModelConfig,
    data: Dataset,
    specs: Vec<KernelSpec>,
    posterior: GpPosterior,
    episode_index: usize,
    beta: f64,
    hyperfit_warning: bool,
}

impl CalibratedModel {
    pub fn new(cfg: ModelConfig) -> Result<Self> {
        cfg.validate()?;
        let data = Dataset::with_cap(
            cfg.kernel.input_dim,
            cfg.output_dim,
            cfg.noise_variance,
            cfg.data_cap,
        );
        let specs = vec![cfg.kernel.clone(); cfg.output_dim];
        let posterior = GpPosterior::fit_per_dim(&data, &specs)?;
        let beta = beta_schedule(&cfg.beta, 0, 0.0);
        Ok(Self {
            cfg,
            data,
            specs,
            posterior,
            episode_index: 0,
            beta,
            hyperfit_warning: false,
        })
    }

    /// Absorbs a batch of transitions, advances the episode counter, refits
    /// the posterior, and recomputes β_n.
    ///
    /// An empty batch only advances the counter: the posterior is untouched
    /// so predictions stay bit-identical.
    pub fn update(&mut self, transitions: &Dataset) -> Result<()> {
        self.episode_index += 1;
        if !transitions.is_empty() {
            self.data.extend_from(transitions)?;
            if let Some(every) = self.cfg.refit_every {
                if self.episode_index % every == 0 && self.data.len() >= MIN_FIT_POINTS {
                    self.refit_hyperparameters();
                }
            }
            self.posterior = GpPosterior::fit_per_dim(&self.data, &self.specs)?;
            if let Some(b) = self.cfg.rkhs_bound {
                for dim in 0..self.cfg.output_dim {
                    let sol = lipschitz_project(&self.posterior, dim, b)?;
                    self.posterior = self.posterior.with_weights(dim, sol.alpha);
                }
            }
        }
        // β must never shrink across episodes, even if eviction reduces the
        // measured information gain.
        let candidate = beta_schedule(&self.cfg.beta, self.episode_index, self.information_gain());
        self.beta = self.beta.max(candidate);
        Ok(())
    }

    /// Posterior mean, standard deviation, and current width at one input.
    pub fn predict_confidence(&self, z: &DVector<f64>) -> (DVector<f64>, DVector<f64>, f64) {
        let (mean, std) = self.posterior.predict(z);
        (mean, std, self.beta)
    }

    pub fn predict_batch(&self, queries: &DMatrix<f64>) -> (DMatrix<f64>, DMatrix<f64>) {
        self.posterior.predict_batch(queries)
    }

    pub fn beta(&self) -> f64 {
        self.beta
    }

    pub fn episode_index(&self) -> usize {
        self.episode_index
    }

    /// Joint information gain of the collected data, summed over output
    /// dimensions.
    pub fn information_gain(&self) -> f64 {
        self.posterior.information_gain()
    }

    pub fn posterior(&self) -> &GpPosterior {
        &self.posterior
    }

    pub fn data(&self) -> &Dataset {
        &self.data
    }

    pub fn config(&self) -> &ModelConfig {
        &self.cfg
    }

    pub fn kernels(&self) -> &[KernelSpec] {
        &self.specs
    }

    /// True when some hyperparameter refit failed and kept the previous
    /// kernel.
    pub fn hyperfit_warning(&self) -> bool {
        self.hyperfit_warning
    }

    fn refit_hyperparameters(&mut self) {
        let opts = HyperFitOptions::default();
        for dim in 0..self.cfg.output_dim {
            let slice = self.data.select_dim(dim).subsample(self.cfg.refit_subsample);
            let outcome = fit_hyperparameters(&slice, &self.specs[dim], &self.cfg.hyper_bounds, &opts);
            self.hyperfit_warning |= outcome.warning;
            self.specs[dim] = outcome.spec;
        }
    }
}
