//! Rollout objectives for trajectory candidates.
//!
//! All four modes share one batched evaluator: rollouts propagate the
//! model's mean residual (certainty-equivalent by default), differing only
//! in how the next state is perturbed. Candidates whose rollout leaves the
//! finite range evaluate to −∞ and are discarded by the optimizer.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::calibrated::CalibratedModel;
use crate::env::Env;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ObjectiveMode {
    /// Extrinsic reward plus λ‖σ_n‖ along the mean rollout.
    Optimistic,
    /// Mean rollout, extrinsic reward only.
    Mean,
    /// Mean rollout perturbed by a per-plan fixed draw η_t: one approximate
    /// posterior function sample shared by every candidate.
    PosteriorSample,
    /// Perturbations β·σ_n ∘ η_t with η part of the decision variables.
    Hallucinated,
}

impl ObjectiveMode {
    pub const ALL: [ObjectiveMode; 4] = [
        ObjectiveMode::Optimistic,
        ObjectiveMode::Mean,
        ObjectiveMode::PosteriorSample,
        ObjectiveMode::Hallucinated,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            ObjectiveMode::Optimistic => "optimistic",
            ObjectiveMode::Mean => "mean",
            ObjectiveMode::PosteriorSample => "posterior_sample",
            ObjectiveMode::Hallucinated => "hallucinated",
        }
    }

    /// True when the decision variables carry hallucinated controls after
    /// the real actions.
    pub fn extends_decision_space(&self) -> bool {
        matches!(self, ObjectiveMode::Hallucinated)
    }
}

impl std::fmt::Display for ObjectiveMode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

impl std::str::FromStr for ObjectiveMode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "optimistic" => Ok(ObjectiveMode::Optimistic),
            "mean" => Ok(ObjectiveMode::Mean),
            "posterior_sample" => Ok(ObjectiveMode::PosteriorSample),
            "hallucinated" => Ok(ObjectiveMode::Hallucinated),
            other => Err(format!(
                "unknown objective mode '{other}' (expected optimistic, mean, posterior_sample, or hallucinated)"
            )),
        }
    }
}

/// Everything fixed during one planning call.
pub struct RolloutContext<'a> {
    pub model: &'a CalibratedModel,
    pub env: &'a dyn Env,
    pub mode: ObjectiveMode,
    pub lambda: f64,
    pub gamma: f64,
    /// Replaces the extrinsic reward with 0 (pure exploration).
    pub zero_reward: bool,
    /// Per-plan fixed standard-normal draw, one column per step; required by
    /// the posterior-sample mode.
    pub eta: Option<&'a DMatrix<f64>>,
    /// Per-particle standard-normal process-noise draws, each d_x × H;
    /// empty means one noise-free rollout.
    pub particles: &'a [DMatrix<f64>],
}

/// Evaluates every candidate (decision_dim × H each) from `x0`.
pub fn evaluate_batch(
    ctx: &RolloutContext<'_>,
    x0: &DVector<f64>,
    candidates: &[DMatrix<f64>],
) -> Vec<f64> {
    if candidates.is_empty() {
        return Vec::new();
    }
    let d_x = ctx.env.state_dim();
    let d_u = ctx.env.action_dim();
    let d_z = d_x + d_u;
    let horizon = candidates[0].ncols();
    let n_cand = candidates.len();
    let n_particles = ctx.particles.len().max(1);
    let batch = n_cand * n_particles;
    let beta = ctx.model.beta();
    let noise_std = ctx.env.noise_std();
    if ctx.mode == ObjectiveMode::PosteriorSample {
        let eta = ctx.eta.expect("posterior-sample mode requires eta draws");
        assert_eq!(eta.nrows(), d_x, "eta row count");
        assert!(eta.ncols() >= horizon, "eta column count");
    }

    let mut states: Vec<DVector<f64>> = Vec::with_capacity(batch);
    for _ in 0..batch {
        states.push(x0.clone());
    }
    let mut values = vec![0.0_f64; batch];
    let mut alive = vec![true; batch];
    let mut queries = DMatrix::zeros(d_z, batch);
    let mut discount = 1.0;

    for t in 0..horizon {
        for (b, state) in states.iter().enumerate() {
            let cand = &candidates[b % n_cand];
            queries.view_mut((0, b), (d_x, 1)).copy_from(state);
            queries
                .view_mut((d_x, b), (d_u, 1))
                .copy_from(&cand.view((0, t), (d_u, 1)));
        }
        let (means, stds) = ctx.model.predict_batch(&queries);

        for b in 0..batch {
            if !alive[b] {
                continue;
            }
            let cand = &candidates[b % n_cand];
            let action = DVector::from_fn(d_u, |j, _| cand[(j, t)]);
            let mut step_value = 0.0;
            if !ctx.zero_reward {
                step_value += ctx.env.reward(&states[b], &action);
            }
            if ctx.lambda != 0.0 {
                let sigma_norm = stds.column(b).norm();
                step_value += ctx.lambda * sigma_norm;
            }
            values[b] += discount * step_value;

            let mut residual = means.column(b).into_owned();
            match ctx.mode {
                ObjectiveMode::Optimistic | ObjectiveMode::Mean => {}
                ObjectiveMode::PosteriorSample => {
                    let eta = ctx.eta.expect("checked above");
                    for j in 0..d_x {
                        residual[j] += stds[(j, b)] * eta[(j, t)];
                    }
                }
                ObjectiveMode::Hallucinated => {
                    for j in 0..d_x {
                        residual[j] += beta * stds[(j, b)] * cand[(d_u + j, t)];
                    }
                }
            }
            if !ctx.particles.is_empty() {
                let noise = &ctx.particles[b / n_cand];
                for j in 0..d_x {
                    residual[j] += noise_std[j] * noise[(j, t)];
                }
            }
            let next = ctx.env.apply_residual(&states[b], &residual);
            if next.iter().any(|v| !v.is_finite()) || !values[b].is_finite() {
                alive[b] = false;
                values[b] = f64::NEG_INFINITY;
                states[b].fill(0.0);
            } else {
                states[b] = next;
            }
        }
        discount *= ctx.gamma;
    }

    (0..n_cand)
        .map(|c| {
            let total: f64 = (0..n_particles).map(|p| values[p * n_cand + c]).sum();
            let v = total / n_particles as f64;
            if v.is_finite() {
                v
            } else {
                f64::NEG_INFINITY
            }
        })
        .collect()
}

/// Single-candidate convenience wrapper.
pub fn evaluate_objective(
    ctx: &RolloutContext<'_>,
    x0: &DVector<f64>,
    actions: &DMatrix<f64>,
) -> f64 {
    evaluate_batch(ctx, x0, std::slice::from_ref(actions))[0]
}

/// Rollout value on the noise-free true dynamics: the oracle's objective.
pub fn evaluate_true_batch(
    env: &dyn Env,
    x0: &DVector<f64>,
    candidates: &[DMatrix<f64>],
    gamma: f64,
) -> Vec<f64> {
    let d_u = env.action_dim();
    candidates
        .iter()
        .map(|cand| {
            let mut state = x0.clone();
            let mut value = 0.0;
            let mut discount = 1.0;
            for t in 0..cand.ncols() {
                let action = DVector::from_fn(d_u, |j, _| cand[(j, t)]);
                value += discount * env.reward(&state, &action);
                state = env.true_dynamics(&state, &action);
                discount *= gamma;
            }
            if value.is_finite() {
                value
            } else {
                f64::NEG_INFINITY
            }
        })
        .collect()
}
