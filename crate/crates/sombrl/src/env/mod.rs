//! Ground-truth dynamics with Gaussian process noise and bounded rewards.
//!
//! Every environment exposes deterministic dynamics f*; stepping adds
//! N(0, σ²) noise per dimension. The model side learns the residual form
//! x_{k+1} = x_k + f(x_k, u_k) + w, so each environment also defines how
//! residual targets are extracted and re-applied (the pendulum unwraps its
//! angle there).

use nalgebra::DVector;
use rand::RngCore;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub mod mountain_car;
pub mod pendulum;
pub mod synthetic;

pub use mountain_car::MountainCar;
pub use pendulum::Pendulum;
pub use synthetic::SyntheticEnv;

pub trait Env {
    fn name(&self) -> &str;
    fn state_dim(&self) -> usize;
    fn action_dim(&self) -> usize;
    fn action_low(&self) -> DVector<f64>;
    fn action_high(&self) -> DVector<f64>;
    /// Nominal episode length for episodic runs.
    fn horizon(&self) -> usize;
    /// Per-dimension process-noise standard deviation.
    fn noise_std(&self) -> &DVector<f64>;
    /// Upper bound on every emitted reward; rewards live in [0, r_max].
    fn r_max(&self) -> f64;
    fn reset(&self, rng: &mut dyn RngCore) -> DVector<f64>;
    /// Noise-free next state under the clipped action, already wrapped into
    /// the state space.
    fn true_dynamics(&self, state: &DVector<f64>, action: &DVector<f64>) -> DVector<f64>;
    fn reward(&self, state: &DVector<f64>, action: &DVector<f64>) -> f64;

    /// Maps a raw state back into the canonical state space.
    fn wrap(&self, state: DVector<f64>) -> DVector<f64> {
        state
    }

    /// Residual learning target for the transition `state → next`.
    fn residual(&self, state: &DVector<f64>, next: &DVector<f64>) -> DVector<f64> {
        next - state
    }

    /// Reconstructs a next state from a predicted residual.
    fn apply_residual(&self, state: &DVector<f64>, residual: &DVector<f64>) -> DVector<f64> {
        self.wrap(state + residual)
    }
}

/// Clips an action into the environment's box.
pub fn clip_action(env: &dyn Env, action: &DVector<f64>) -> DVector<f64> {
    let low = env.action_low();
    let high = env.action_high();
    DVector::from_fn(env.action_dim(), |i, _| action[i].clamp(low[i], high[i]))
}

/// One stochastic step: clip the action, apply the true dynamics, add
/// process noise, wrap, and emit the bounded reward.
pub fn env_step(
    env: &dyn Env,
    state: &DVector<f64>,
    action: &DVector<f64>,
    rng: &mut dyn RngCore,
) -> Result<(DVector<f64>, f64)> {
    if state.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite { context: "environment step input state" });
    }
    let u = clip_action(env, action);
    let mut next = env.true_dynamics(state, &u);
    let noise = env.noise_std();
    for j in 0..next.len() {
        if noise[j] > 0.0 {
            let w: f64 = StandardNormal.sample(rng);
            next[j] += noise[j] * w;
        }
    }
    let next = env.wrap(next);
    let reward = env.reward(state, &u);
    Ok((next, reward))
}

/// Wraps an environment with a quadratic-norm action cost, re-shifted so
/// rewards stay nonnegative: r'(x, u) = r(x, u) − K‖u‖₂ + K·u_max·√d_u.
pub struct ActionCost {
    inner: Box<dyn Env>,
    weight: f64,
    shift: f64,
}

impl ActionCost {
    pub fn new(inner: Box<dyn Env>, weight: f64) -> Self {
        assert!(weight >= 0.0, "action cost weight must be nonnegative");
        let u_max = inner
            .action_low()
            .iter()
            .chain(inner.action_high().iter())
            .fold(0.0_f64, |m, &b| m.max(b.abs()));
        let shift = weight * u_max * (inner.action_dim() as f64).sqrt();
        Self { inner, weight, shift }
    }
}

impl Env for ActionCost {
    fn name(&self) -> &str {
        self.inner.name()
    }

    fn state_dim(&self) -> usize {
        self.inner.state_dim()
    }

    fn action_dim(&self) -> usize {
        self.inner.action_dim()
    }

    fn action_low(&self) -> DVector<f64> {
        self.inner.action_low()
    }

    fn action_high(&self) -> DVector<f64> {
        self.inner.action_high()
    }

    fn horizon(&self) -> usize {
        self.inner.horizon()
    }

    fn noise_std(&self) -> &DVector<f64> {
        self.inner.noise_std()
    }

    fn r_max(&self) -> f64 {
        self.inner.r_max() + self.shift
    }

    fn reset(&self, rng: &mut dyn RngCore) -> DVector<f64> {
        self.inner.reset(rng)
    }

    fn true_dynamics(&self, state: &DVector<f64>, action: &DVector<f64>) -> DVector<f64> {
        self.inner.true_dynamics(state, action)
    }

    fn reward(&self, state: &DVector<f64>, action: &DVector<f64>) -> f64 {
        self.inner.reward(state, action) - self.weight * action.norm() + self.shift
    }

    fn wrap(&self, state: DVector<f64>) -> DVector<f64> {
        self.inner.wrap(state)
    }

    fn residual(&self, state: &DVector<f64>, next: &DVector<f64>) -> DVector<f64> {
        self.inner.residual(state, next)
    }

    fn apply_residual(&self, state: &DVector<f64>, residual: &DVector<f64>) -> DVector<f64> {
        self.inner.apply_residual(state, residual)
    }
}

/// Config-level environment selector.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case", deny_unknown_fields)]
pub enum EnvSpec {
    Pendulum {
        #[serde(default = "default_dt")]
        dt: f64,
        #[serde(default = "default_noise_std")]
        noise_std: f64,
        #[serde(default = "pendulum_horizon")]
        horizon: usize,
        #[serde(default = "default_jitter")]
        reset_jitter: f64,
        #[serde(default)]
        action_cost_weight: f64,
    },
    MountainCar {
        #[serde(default = "default_noise_std")]
        noise_std: f64,
        #[serde(default = "mountain_car_horizon")]
        horizon: usize,
        #[serde(default = "default_jitter")]
        reset_jitter: f64,
        #[serde(default)]
        action_cost_weight: f64,
    },
}

fn default_dt() -> f64 {
    0.05
}

fn default_noise_std() -> f64 {
    0.01
}

fn default_jitter() -> f64 {
    0.05
}

fn pendulum_horizon() -> usize {
    100
}

fn mountain_car_horizon() -> usize {
    120
}

impl EnvSpec {
    pub fn pendulum() -> Self {
        EnvSpec::Pendulum {
            dt: default_dt(),
            noise_std: default_noise_std(),
            horizon: pendulum_horizon(),
            reset_jitter: default_jitter(),
            action_cost_weight: 0.0,
        }
    }

    pub fn mountain_car() -> Self {
        EnvSpec::MountainCar {
            noise_std: default_noise_std(),
            horizon: mountain_car_horizon(),
            reset_jitter: default_jitter(),
            action_cost_weight: 0.0,
        }
    }

    pub fn family_name(&self) -> &'static str {
        match self {
            EnvSpec::Pendulum { .. } => "pendulum",
            EnvSpec::MountainCar { .. } => "mountain_car",
        }
    }

    pub fn validate(&self) -> Result<()> {
        let (noise, horizon, jitter, cost) = match self {
            EnvSpec::Pendulum { dt, noise_std, horizon, reset_jitter, action_cost_weight } => {
                if !(dt.is_finite() && *dt > 0.0) {
                    return Err(Error::Config("env.dt must be positive".into()));
                }
                (*noise_std, *horizon, *reset_jitter, *action_cost_weight)
            }
            EnvSpec::MountainCar { noise_std, horizon, reset_jitter, action_cost_weight } => {
                (*noise_std, *horizon, *reset_jitter, *action_cost_weight)
            }
        };
        if !(noise.is_finite() && noise >= 0.0) {
            return Err(Error::Config("env.noise_std must be nonnegative".into()));
        }
        if horizon == 0 {
            return Err(Error::Config("env.horizon must be positive".into()));
        }
        if !(jitter.is_finite() && jitter >= 0.0) {
            return Err(Error::Config("env.reset_jitter must be nonnegative".into()));
        }
        if !(cost.is_finite() && cost >= 0.0) {
            return Err(Error::Config("env.action_cost_weight must be nonnegative".into()));
        }
        Ok(())
    }

    pub fn build(&self) -> Result<Box<dyn Env>> {
        self.validate()?;
        let (base, cost): (Box<dyn Env>, f64) = match self {
            EnvSpec::Pendulum { dt, noise_std, horizon, reset_jitter, action_cost_weight } => (
                Box::new(Pendulum::new(*dt, *noise_std, *horizon, *reset_jitter)),
                *action_cost_weight,
            ),
            EnvSpec::MountainCar { noise_std, horizon, reset_jitter, action_cost_weight } => (
                Box::new(MountainCar::new(*noise_std, *horizon, *reset_jitter)),
                *action_cost_weight,
            ),
        };
        if cost > 0.0 {
            Ok(Box::new(ActionCost::new(base, cost)))
        } else {
            Ok(base)
        }
    }
}
