//! Schedules for the exploration weight λ_n.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Floor applied by the auto-tune step so λ stays usable as a divisor.
pub const LAMBDA_FLOOR: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "snake_case")]
pub enum LambdaSchedule {
    Constant { value: f64 },
    /// λ_n = C_max · T · (1 + √d_x) · β_n / σ.
    Theory { c_max: f64, horizon: usize, state_dim: usize, noise_std: f64 },
    /// Linear interpolation from `initial` at episode 0 to `final_value` at
    /// `final_episode`, constant afterwards.
    LinearDecay { initial: f64, final_value: f64, final_episode: usize },
    /// Gradient steps on the exploration-matching loss; the planner owns the
    /// evolving value, `initial` only seeds it.
    AutoTune { step_size: f64, initial: f64, min: f64, max: f64 },
}

impl Default for LambdaSchedule {
    fn default() -> Self {
        LambdaSchedule::Constant { value: 10.0 }
    }
}

impl LambdaSchedule {
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: &str| Err(Error::Config(format!("lambda schedule: {msg}")));
        match self {
            LambdaSchedule::Constant { value } => {
                if !(value.is_finite() && *value >= 0.0) {
                    return bad("constant value must be nonnegative");
                }
            }
            LambdaSchedule::Theory { c_max, horizon, state_dim, noise_std } => {
                if !(c_max.is_finite() && *c_max > 0.0) {
                    return bad("c_max must be positive");
                }
                if *horizon == 0 {
                    return bad("horizon must be positive");
                }
                if *state_dim == 0 {
                    return bad("state_dim must be positive");
                }
                if !(noise_std.is_finite() && *noise_std > 0.0) {
                    return bad("noise_std must be positive");
                }
            }
            LambdaSchedule::LinearDecay { initial, final_value, final_episode } => {
                if !(initial.is_finite() && *initial >= 0.0)
                    || !(final_value.is_finite() && *final_value >= 0.0)
                {
                    return bad("decay endpoints must be nonnegative");
                }
                if *final_episode == 0 {
                    return bad("final_episode must be positive");
                }
            }
            LambdaSchedule::AutoTune { step_size, initial, min, max } => {
                if !(step_size.is_finite() && *step_size > 0.0) {
                    return bad("step_size must be positive");
                }
                if !(min.is_finite() && *min > 0.0) || !(max.is_finite() && max < &f64::INFINITY) {
                    return bad("bounds must be positive and finite");
                }
                if min > max {
                    return bad("min must not exceed max");
                }
                if !(initial >= min && initial <= max) {
                    return bad("initial must lie inside [min, max]");
                }
            }
        }
        Ok(())
    }
}

/// λ for episode `n` under `schedule`, given the current confidence width β.
pub fn lambda_value(schedule: &LambdaSchedule, n: usize, beta: f64) -> f64 {
    match schedule {
        LambdaSchedule::Constant { value } => *value,
        LambdaSchedule::Theory { c_max, horizon, state_dim, noise_std } => {
            c_max * *horizon as f64 * (1.0 + (*state_dim as f64).sqrt()) * beta / noise_std
        }
        LambdaSchedule::LinearDecay { initial, final_value, final_episode } => {
            let frac = (n as f64 / *final_episode as f64).min(1.0);
            initial + (final_value - initial) * frac
        }
        LambdaSchedule::AutoTune { initial, .. } => *initial,
    }
}

/// One gradient step on L(λ) = E[log λ · (σ_current − σ_target)]: λ moves up
/// when the executed policy gathers less uncertainty than the target batch.
/// Clamping to the schedule's [min, max] is the caller's job; only a small
/// positivity floor is enforced here.
pub fn lambda_autotune_step(
    lambda: f64,
    sigma_current: &[f64],
    sigma_target: &[f64],
    step: f64,
) -> f64 {
    assert!(lambda > 0.0, "lambda must be positive");
    assert!(
        !sigma_current.is_empty() && !sigma_target.is_empty(),
        "uncertainty batches must be nonempty"
    );
    let mean = |xs: &[f64]| xs.iter().sum::<f64>() / xs.len() as f64;
    let delta = mean(sigma_current) - mean(sigma_target);
    (lambda - step * delta / lambda).max(LAMBDA_FLOOR)
}

#[cfg(test)]
mod tests {
    use approx::assert_abs_diff_eq;

    use super::*;

    #[test]
    fn theory_formula_arithmetic() {
        let s = LambdaSchedule::Theory { c_max: 1.0, horizon: 10, state_dim: 4, noise_std: 1.0 };
        assert_abs_diff_eq!(lambda_value(&s, 0, 2.0), 60.0, epsilon = 1e-12);
    }

    #[test]
    fn constant_echoes_its_value() {
        let s = LambdaSchedule::Constant { value: 10.0 };
        for n in [0, 1, 5, 100] {
            assert_eq!(lambda_value(&s, n, 3.0), 10.0);
        }
    }

    #[test]
    fn linear_decay_endpoints_and_clamp() {
        let s = LambdaSchedule::LinearDecay { initial: 0.5, final_value: 0.0, final_episode: 10 };
        assert_eq!(lambda_value(&s, 0, 1.0), 0.5);
        assert_abs_diff_eq!(lambda_value(&s, 5, 1.0), 0.25, epsilon = 1e-12);
        assert_eq!(lambda_value(&s, 10, 1.0), 0.0);
        assert_eq!(lambda_value(&s, 25, 1.0), 0.0);
    }

    #[test]
    fn autotune_step_arithmetic() {
        assert_abs_diff_eq!(
            lambda_autotune_step(1.0, &[0.1, 0.3], &[0.7, 0.7], 0.1),
            1.05,
            epsilon = 1e-12
        );
        let unchanged = lambda_autotune_step(2.0, &[0.4, 0.6], &[0.5, 0.5], 0.1);
        assert_abs_diff_eq!(unchanged, 2.0, epsilon = 1e-12);
    }

    #[test]
    fn autotune_descends_toward_floor_when_over_exploring() {
        let mut lambda = 1.0;
        let mut last = lambda;
        for _ in 0..200 {
            lambda = lambda_autotune_step(lambda, &[1.0], &[0.0], 0.5);
            assert!(lambda <= last);
            last = lambda;
        }
        assert!(lambda >= LAMBDA_FLOOR);
    }

    #[test]
    fn validation_rejects_bad_schedules() {
        assert!(LambdaSchedule::Constant { value: -1.0 }.validate().is_err());
        assert!(LambdaSchedule::Theory { c_max: 0.0, horizon: 1, state_dim: 1, noise_std: 1.0 }
            .validate()
            .is_err());
        assert!(LambdaSchedule::LinearDecay { initial: 0.5, final_value: 0.0, final_episode: 0 }
            .validate()
            .is_err());
        assert!(LambdaSchedule::AutoTune { step_size: 0.1, initial: 5.0, min: 0.1, max: 1.0 }
            .validate()
            .is_err());
        assert!(LambdaSchedule::default().validate().is_ok());
    }
}
