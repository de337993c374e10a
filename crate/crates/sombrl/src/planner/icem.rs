//! Improved cross-entropy method over open-loop decision sequences.
//!
//! Candidates are sampled from a per-element Gaussian whose mean and spread
//! are refit to the elite set each iteration, with colored temporal noise,
//! a decaying population, elite reuse, injection of the current mean, and
//! warm-start injection of the shifted previous plan.

use nalgebra::DMatrix;
use rand_chacha::ChaCha12Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::planner::noise::colored_noise;

const STD_FLOOR: f64 = 1e-8;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ICemConfig {
    /// Samples drawn in the first iteration.
    pub population: usize,
    /// Candidates kept to refit the sampling distribution.
    pub elites: usize,
    pub iterations: usize,
    /// Planning horizon in steps.
    pub horizon: usize,
    /// Temporal correlation exponent of the sampling noise; 0 is white.
    pub noise_color_exponent: f64,
    /// Population shrink factor per iteration, floored at twice the elites.
    pub population_decay: f64,
    /// Fraction of the elite set re-injected into the next iteration.
    pub elite_fraction_kept: f64,
    /// Initial sampling spread as a fraction of the bound width.
    pub init_std: f64,
}

impl Default for ICemConfig {
    fn default() -> Self {
        ICemConfig {
            population: 200,
            elites: 20,
            iterations: 5,
            horizon: 30,
            noise_color_exponent: 2.0,
            population_decay: 1.25,
            elite_fraction_kept: 0.3,
            init_std: 0.5,
        }
    }
}

impl ICemConfig {
    pub fn validate(&self) -> Result<()> {
        if self.elites == 0 {
            return Err(Error::Config("icem.elites must be at least 1".into()));
        }
        if self.population < 2 * self.elites {
            return Err(Error::Config(
                "icem.population must be at least twice icem.elites".into(),
            ));
        }
        if self.iterations == 0 {
            return Err(Error::Config("icem.iterations must be at least 1".into()));
        }
        if self.horizon == 0 {
            return Err(Error::Config("icem.horizon must be at least 1".into()));
        }
        if !(self.noise_color_exponent.is_finite() && self.noise_color_exponent >= 0.0) {
            return Err(Error::Config(
                "icem.noise_color_exponent must be finite and nonnegative".into(),
            ));
        }
        if !(self.population_decay.is_finite() && self.population_decay >= 1.0) {
            return Err(Error::Config(
                "icem.population_decay must be at least 1".into(),
            ));
        }
        if !(0.0..=1.0).contains(&self.elite_fraction_kept) {
            return Err(Error::Config(
                "icem.elite_fraction_kept must lie in [0, 1]".into(),
            ));
        }
        if !(self.init_std.is_finite() && self.init_std > 0.0) {
            return Err(Error::Config("icem.init_std must be positive".into()));
        }
        Ok(())
    }

    /// Population size at a given optimizer iteration.
    pub fn population_at(&self, iteration: usize) -> usize {
        let decayed = self.population as f64 / self.population_decay.powi(iteration as i32);
        (decayed.floor() as usize).max(2 * self.elites)
    }
}

#[derive(Debug, Clone)]
pub struct PlanOutcome {
    /// Best decision sequence found, decision dims × horizon.
    pub actions: DMatrix<f64>,
    pub value: f64,
    /// Every candidate evaluated to −∞; `actions` falls back to zeros
    /// clamped into the bounds.
    pub all_rejected: bool,
    /// A shifted previous plan was seeded into the first iteration.
    pub injected_warm_start: bool,
    /// Best value after each optimizer iteration.
    pub trace: Vec<f64>,
}

/// Drops the first step of an executed plan and repeats its last column.
pub fn shift_sequence(prev: &DMatrix<f64>) -> DMatrix<f64> {
    let (dims, horizon) = prev.shape();
    DMatrix::from_fn(dims, horizon, |d, t| {
        if t + 1 < horizon {
            prev[(d, t + 1)]
        } else {
            prev[(d, horizon - 1)]
        }
    })
}

fn clamp_candidate(cand: &mut DMatrix<f64>, low: &[f64], high: &[f64]) {
    for t in 0..cand.ncols() {
        for d in 0..cand.nrows() {
            cand[(d, t)] = cand[(d, t)].clamp(low[d], high[d]);
        }
    }
}

/// Maximizes the batch objective over decision sequences inside the box
/// `[low, high]` per dimension.
pub fn icem_plan<F>(
    objective: &mut F,
    cfg: &ICemConfig,
    low: &[f64],
    high: &[f64],
    previous: Option<&DMatrix<f64>>,
    rng: &mut ChaCha12Rng,
) -> Result<PlanOutcome>
where
    F: FnMut(&[DMatrix<f64>]) -> Vec<f64>,
{
    cfg.validate()?;
    let dims = low.len();
    assert_eq!(high.len(), dims, "bound length mismatch");
    for d in 0..dims {
        assert!(
            low[d].is_finite() && high[d].is_finite() && low[d] < high[d],
            "invalid bounds on decision dimension {d}"
        );
    }
    let horizon = cfg.horizon;

    let mut mean = match previous {
        Some(prev) => {
            assert_eq!(prev.shape(), (dims, horizon), "warm-start shape mismatch");
            shift_sequence(prev)
        }
        None => DMatrix::from_fn(dims, horizon, |d, _| 0.5 * (low[d] + high[d])),
    };
    let mut std = DMatrix::from_fn(dims, horizon, |d, _| cfg.init_std * (high[d] - low[d]));

    let kept_count = ((cfg.elites as f64) * cfg.elite_fraction_kept).floor() as usize;
    let mut kept: Vec<DMatrix<f64>> = Vec::new();
    let mut best_actions: Option<DMatrix<f64>> = None;
    let mut best_value = f64::NEG_INFINITY;
    let mut trace = Vec::with_capacity(cfg.iterations);

    for iteration in 0..cfg.iterations {
        let mut candidates: Vec<DMatrix<f64>> = Vec::new();
        if iteration == 0 {
            if let Some(prev) = previous {
                let mut shifted = shift_sequence(prev);
                clamp_candidate(&mut shifted, low, high);
                candidates.push(shifted);
            }
        }
        candidates.extend(kept.iter().cloned());
        let mut mid = mean.clone();
        clamp_candidate(&mut mid, low, high);
        candidates.push(mid);
        for _ in 0..cfg.population_at(iteration) {
            let noise = colored_noise(rng, cfg.noise_color_exponent, dims, horizon);
            let mut cand = DMatrix::from_fn(dims, horizon, |d, t| {
                mean[(d, t)] + std[(d, t)] * noise[(d, t)]
            });
            clamp_candidate(&mut cand, low, high);
            candidates.push(cand);
        }

        let values = objective(&candidates);
        assert_eq!(values.len(), candidates.len(), "objective batch size");

        let mut order: Vec<usize> = (0..candidates.len()).collect();
        order.sort_by(|&a, &b| values[b].partial_cmp(&values[a]).expect("comparable values"));
        let elite_idx: Vec<usize> = order
            .iter()
            .copied()
            .take(cfg.elites)
            .filter(|&i| values[i] > f64::NEG_INFINITY)
            .collect();

        if values[order[0]] > best_value {
            best_value = values[order[0]];
            best_actions = Some(candidates[order[0]].clone());
        }
        trace.push(best_value);

        if elite_idx.is_empty() {
            kept.clear();
            continue;
        }
        let inv = 1.0 / elite_idx.len() as f64;
        for t in 0..horizon {
            for d in 0..dims {
                let m: f64 = elite_idx.iter().map(|&i| candidates[i][(d, t)]).sum::<f64>() * inv;
                let v: f64 = elite_idx
                    .iter()
                    .map(|&i| (candidates[i][(d, t)] - m).powi(2))
                    .sum::<f64>()
                    * inv;
                mean[(d, t)] = m;
                std[(d, t)] = v.sqrt().max(STD_FLOOR);
            }
        }
        kept = elite_idx
            .iter()
            .take(kept_count)
            .map(|&i| candidates[i].clone())
            .collect();
    }

    let injected_warm_start = previous.is_some();
    match best_actions {
        Some(actions) if best_value > f64::NEG_INFINITY => Ok(PlanOutcome {
            actions,
            value: best_value,
            all_rejected: false,
            injected_warm_start,
            trace,
        }),
        _ => {
            let mut zeros = DMatrix::zeros(dims, horizon);
            clamp_candidate(&mut zeros, low, high);
            Ok(PlanOutcome {
                actions: zeros,
                value: f64::NEG_INFINITY,
                all_rejected: true,
                injected_warm_start,
                trace,
            })
        }
    }
}

#[cfg(test)]
mod tests {
    use rand::SeedableRng;

    use super::*;

    fn quadratic_objective(target: f64) -> impl FnMut(&[DMatrix<f64>]) -> Vec<f64> {
        move |cands: &[DMatrix<f64>]| {
            cands
                .iter()
                .map(|c| -c.iter().map(|v| (v - target).powi(2)).sum::<f64>())
                .collect()
        }
    }

    fn small_config() -> ICemConfig {
        ICemConfig {
            population: 60,
            elites: 8,
            iterations: 10,
            horizon: 5,
            noise_color_exponent: 1.0,
            ..ICemConfig::default()
        }
    }

    #[test]
    fn converges_on_an_off_center_quadratic() {
        let cfg = ICemConfig {
            population: 120,
            elites: 24,
            iterations: 12,
            ..small_config()
        };
        let mut rng = ChaCha12Rng::seed_from_u64(0);
        let mut obj = quadratic_objective(0.4);
        let out = icem_plan(&mut obj, &cfg, &[-1.0, -1.0], &[1.0, 1.0], None, &mut rng).unwrap();
        assert!(!out.all_rejected);
        assert!(out.value > -2e-2, "value {}", out.value);
        for v in out.actions.iter() {
            assert!((v - 0.4).abs() < 0.1, "coordinate {v}");
        }
    }

    #[test]
    fn default_iteration_budget_reaches_the_origin() {
        let cfg = ICemConfig { horizon: 5, ..ICemConfig::default() };
        let mut rng = ChaCha12Rng::seed_from_u64(10);
        let mut obj = quadratic_objective(0.0);
        let out = icem_plan(&mut obj, &cfg, &[-1.0], &[1.0], None, &mut rng).unwrap();
        assert!(out.value > -1e-3, "value {}", out.value);
        for v in out.actions.iter() {
            assert!(v.abs() < 1e-3, "coordinate {v}");
        }
    }

    #[test]
    fn linear_objective_saturates_the_bound() {
        let cfg = small_config();
        let mut rng = ChaCha12Rng::seed_from_u64(11);
        let mut obj = |cands: &[DMatrix<f64>]| cands.iter().map(|c| c.sum()).collect();
        let out = icem_plan(&mut obj, &cfg, &[-1.0], &[1.0], None, &mut rng).unwrap();
        for v in out.actions.iter() {
            assert!(*v > 0.95, "expected saturation near 1, got {v}");
        }
    }

    #[test]
    fn warm_start_value_dominates_the_shifted_previous_plan() {
        let cfg = ICemConfig { iterations: 2, ..small_config() };
        let mut rng = ChaCha12Rng::seed_from_u64(12);
        let prev = DMatrix::from_fn(1, cfg.horizon, |_, t| ((t as f64) * 0.37).sin());
        let shifted = shift_sequence(&prev);
        let mut obj = quadratic_objective(0.25);
        let baseline = obj(std::slice::from_ref(&shifted))[0];
        let out = icem_plan(&mut obj, &cfg, &[-1.0], &[1.0], Some(&prev), &mut rng).unwrap();
        assert!(out.injected_warm_start);
        assert!(out.value >= baseline);
    }

    #[test]
    fn respects_bounds_when_optimum_is_outside() {
        let cfg = small_config();
        let mut rng = ChaCha12Rng::seed_from_u64(1);
        let mut obj = quadratic_objective(5.0);
        let out = icem_plan(&mut obj, &cfg, &[-1.0], &[1.0], None, &mut rng).unwrap();
        for v in out.actions.iter() {
            assert!(*v <= 1.0 && *v >= -1.0);
            assert!((v - 1.0).abs() < 0.05, "should push against the upper bound, got {v}");
        }
    }

    #[test]
    fn deterministic_given_the_same_seed() {
        let cfg = small_config();
        let run = || {
            let mut rng = ChaCha12Rng::seed_from_u64(7);
            let mut obj = quadratic_objective(-0.3);
            icem_plan(&mut obj, &cfg, &[-1.0, -1.0], &[1.0, 1.0], None, &mut rng).unwrap()
        };
        let a = run();
        let b = run();
        assert_eq!(a.actions, b.actions);
        assert_eq!(a.value, b.value);
    }

    #[test]
    fn all_rejected_falls_back_to_clamped_zeros() {
        let cfg = small_config();
        let mut rng = ChaCha12Rng::seed_from_u64(2);
        let mut obj = |cands: &[DMatrix<f64>]| vec![f64::NEG_INFINITY; cands.len()];
        let out = icem_plan(&mut obj, &cfg, &[0.2, -1.0], &[1.0, 1.0], None, &mut rng).unwrap();
        assert!(out.all_rejected);
        assert_eq!(out.value, f64::NEG_INFINITY);
        for t in 0..out.actions.ncols() {
            assert_eq!(out.actions[(0, t)], 0.2);
            assert_eq!(out.actions[(1, t)], 0.0);
        }
    }

    #[test]
    fn best_value_trace_is_monotone() {
        let cfg = small_config();
        let mut rng = ChaCha12Rng::seed_from_u64(3);
        let mut obj = quadratic_objective(0.1);
        let out = icem_plan(&mut obj, &cfg, &[-1.0], &[1.0], None, &mut rng).unwrap();
        assert_eq!(out.trace.len(), cfg.iterations);
        for w in out.trace.windows(2) {
            assert!(w[1] >= w[0]);
        }
    }

    #[test]
    fn shifted_previous_plan_is_injected_first() {
        let cfg = ICemConfig { iterations: 1, ..small_config() };
        let mut rng = ChaCha12Rng::seed_from_u64(4);
        let prev = DMatrix::from_fn(1, cfg.horizon, |_, t| 0.1 * t as f64);
        let expected = shift_sequence(&prev);
        let mut seen_first: Option<DMatrix<f64>> = None;
        let mut obj = |cands: &[DMatrix<f64>]| {
            if seen_first.is_none() {
                seen_first = Some(cands[0].clone());
            }
            vec![0.0; cands.len()]
        };
        icem_plan(&mut obj, &cfg, &[-1.0], &[1.0], Some(&prev), &mut rng).unwrap();
        assert_eq!(seen_first.unwrap(), expected);
    }

    #[test]
    fn population_decays_with_injected_mean_and_kept_elites() {
        let cfg = ICemConfig {
            population: 40,
            elites: 5,
            iterations: 3,
            horizon: 4,
            population_decay: 2.0,
            elite_fraction_kept: 0.3,
            ..ICemConfig::default()
        };
        let mut rng = ChaCha12Rng::seed_from_u64(5);
        let mut sizes = Vec::new();
        let mut obj = |cands: &[DMatrix<f64>]| {
            sizes.push(cands.len());
            cands.iter().map(|c| -c.iter().map(|v| v * v).sum::<f64>()).collect()
        };
        icem_plan(&mut obj, &cfg, &[-1.0], &[1.0], None, &mut rng).unwrap();
        assert_eq!(cfg.population_at(0), 40);
        assert_eq!(cfg.population_at(1), 20);
        assert_eq!(cfg.population_at(2), 10);
        // The mean joins every iteration; one kept elite joins the later two.
        assert_eq!(sizes, vec![41, 22, 12]);
    }

    #[test]
    fn validate_rejects_bad_settings() {
        let bad = ICemConfig { elites: 0, ..ICemConfig::default() };
        assert!(bad.validate().is_err());
        let bad = ICemConfig { population: 10, elites: 8, ..ICemConfig::default() };
        assert!(bad.validate().is_err());
        let bad = ICemConfig { population_decay: 0.5, ..ICemConfig::default() };
        assert!(bad.validate().is_err());
        let bad = ICemConfig { elite_fraction_kept: 1.5, ..ICemConfig::default() };
        assert!(bad.validate().is_err());
        let bad = ICemConfig { init_std: 0.0, ..ICemConfig::default() };
        assert!(bad.validate().is_err());
    }
}
