//! Receding-horizon planning: rollout objectives, λ schedules, colored
//! sampling noise, and the iCEM optimizer behind one MPC facade.

pub mod icem;
pub mod lambda;
pub mod noise;
pub mod objective;

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha12Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

pub use icem::{icem_plan, shift_sequence, ICemConfig, PlanOutcome};
pub use lambda::{lambda_autotune_step, lambda_value, LambdaSchedule, LAMBDA_FLOOR};
pub use noise::colored_noise;
pub use objective::{
    evaluate_batch, evaluate_objective, evaluate_true_batch, ObjectiveMode, RolloutContext,
};

use crate::calibrated::CalibratedModel;
use crate::env::Env;
use crate::error::{Error, Result};
use crate::seed::substream;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PlannerConfig {
    pub icem: ICemConfig,
    pub mode: ObjectiveMode,
    pub lambda: LambdaSchedule,
    /// Discount applied inside rollouts; 1 recovers the undiscounted sum.
    pub gamma: f64,
    /// Process-noise particles per candidate; 1 plans on the
    /// certainty-equivalent rollout.
    pub particles: usize,
}

impl Default for PlannerConfig {
    fn default() -> Self {
        PlannerConfig {
            icem: ICemConfig::default(),
            mode: ObjectiveMode::Optimistic,
            lambda: LambdaSchedule::default(),
            gamma: 1.0,
            particles: 1,
        }
    }
}

impl PlannerConfig {
    pub fn validate(&self) -> Result<()> {
        self.icem.validate()?;
        self.lambda.validate()?;
        if !(self.gamma.is_finite() && self.gamma > 0.0 && self.gamma <= 1.0) {
            return Err(Error::Config("planner.gamma must lie in (0, 1]".into()));
        }
        if self.particles == 0 {
            return Err(Error::Config("planner.particles must be at least 1".into()));
        }
        Ok(())
    }
}

/// One planning step's result.
#[derive(Debug, Clone)]
pub struct ActOutcome {
    /// First action of the replanned sequence.
    pub action: DVector<f64>,
    /// Planned action sequence (action dims only), d_u × H.
    pub planned: DMatrix<f64>,
    pub value: f64,
    pub lambda: f64,
    pub all_rejected: bool,
    pub injected_warm_start: bool,
}

/// Plans with iCEM at every step, warm-starting from the shifted previous
/// solution within an episode.
pub struct MpcPlanner {
    cfg: PlannerConfig,
    state_dim: usize,
    action_dim: usize,
    action_low: Vec<f64>,
    action_high: Vec<f64>,
    zero_reward: bool,
    warm: Option<DMatrix<f64>>,
    current_lambda: f64,
    lambda_started: bool,
    plan_counter: u64,
    base_seed: u64,
    rng: ChaCha12Rng,
}

impl MpcPlanner {
    pub fn new(cfg: PlannerConfig, env: &dyn Env, base_seed: u64) -> Result<Self> {
        cfg.validate()?;
        let action_low = env.action_low().iter().copied().collect::<Vec<f64>>();
        let action_high = env.action_high().iter().copied().collect::<Vec<f64>>();
        let rng = ChaCha12Rng::seed_from_u64(substream(base_seed, "planner", 0));
        Ok(MpcPlanner {
            cfg,
            state_dim: env.state_dim(),
            action_dim: env.action_dim(),
            action_low,
            action_high,
            zero_reward: false,
            warm: None,
            current_lambda: 0.0,
            lambda_started: false,
            plan_counter: 0,
            base_seed,
            rng,
        })
    }

    pub fn config(&self) -> &PlannerConfig {
        &self.cfg
    }

    /// Replaces the extrinsic reward with zero in every rollout objective.
    pub fn set_zero_reward(&mut self, flag: bool) {
        self.zero_reward = flag;
    }

    pub fn current_lambda(&self) -> f64 {
        self.current_lambda
    }

    /// Overrides λ directly; the auto-tune bounds still apply.
    pub fn set_lambda(&mut self, value: f64) {
        self.current_lambda = match &self.cfg.lambda {
            LambdaSchedule::AutoTune { min, max, .. } => value.clamp(*min, *max),
            _ => value.max(0.0),
        };
        self.lambda_started = true;
    }

    /// Resets the warm start and refreshes λ for the coming episode.
    pub fn begin_episode(&mut self, episode: usize, beta: f64) {
        self.warm = None;
        match &self.cfg.lambda {
            LambdaSchedule::AutoTune { initial, min, max, .. } => {
                if !self.lambda_started {
                    self.current_lambda = *initial;
                }
                self.current_lambda = self.current_lambda.clamp(*min, *max);
            }
            schedule => self.current_lambda = lambda_value(schedule, episode, beta),
        }
        self.lambda_started = true;
    }

    fn uniform_action_plan(&mut self, horizon: usize) -> DMatrix<f64> {
        let low = self.action_low.clone();
        let high = self.action_high.clone();
        DMatrix::from_fn(self.action_dim, horizon, |d, _| {
            self.rng.random_range(low[d]..=high[d])
        })
    }

    /// Plans from `state` during episode `episode` and returns the first
    /// action. Episode 0 has no model yet and acts uniformly at random.
    pub fn act(
        &mut self,
        model: &CalibratedModel,
        env: &dyn Env,
        state: &DVector<f64>,
        episode: usize,
    ) -> Result<ActOutcome> {
        let horizon = self.cfg.icem.horizon;
        if episode == 0 {
            let planned = self.uniform_action_plan(horizon);
            return Ok(ActOutcome {
                action: planned.column(0).into_owned(),
                planned,
                value: 0.0,
                lambda: self.current_lambda,
                all_rejected: false,
                injected_warm_start: false,
            });
        }

        let d_x = self.state_dim;
        let d_u = self.action_dim;
        let mut low = self.action_low.clone();
        let mut high = self.action_high.clone();
        if self.cfg.mode.extends_decision_space() {
            low.extend(std::iter::repeat(-1.0).take(d_x));
            high.extend(std::iter::repeat(1.0).take(d_x));
        }

        let mut draw_rng = ChaCha12Rng::seed_from_u64(substream(
            self.base_seed,
            "plan_noise",
            self.plan_counter,
        ));
        let eta = if self.cfg.mode == ObjectiveMode::PosteriorSample {
            Some(DMatrix::from_fn(d_x, horizon, |_, _| {
                draw_rng.sample::<f64, _>(StandardNormal)
            }))
        } else {
            None
        };
        let particles: Vec<DMatrix<f64>> = if self.cfg.particles > 1 {
            (0..self.cfg.particles)
                .map(|_| {
                    DMatrix::from_fn(d_x, horizon, |_, _| {
                        draw_rng.sample::<f64, _>(StandardNormal)
                    })
                })
                .collect()
        } else {
            Vec::new()
        };

        let lambda_eff = match self.cfg.mode {
            ObjectiveMode::Optimistic => self.current_lambda,
            _ => 0.0,
        };
        let ctx = RolloutContext {
            model,
            env,
            mode: self.cfg.mode,
            lambda: lambda_eff,
            gamma: self.cfg.gamma,
            zero_reward: self.zero_reward,
            eta: eta.as_ref(),
            particles: &particles,
        };
        let mut objective = |cands: &[DMatrix<f64>]| evaluate_batch(&ctx, state, cands);

        let icem_cfg = self.cfg.icem.clone();
        let warm = self.warm.take();
        let outcome = icem_plan(
            &mut objective,
            &icem_cfg,
            &low,
            &high,
            warm.as_ref(),
            &mut self.rng,
        )?;
        self.plan_counter += 1;
        self.warm = Some(outcome.actions.clone());

        let planned = outcome.actions.rows(0, d_u).into_owned();
        Ok(ActOutcome {
            action: planned.column(0).into_owned(),
            planned,
            value: outcome.value,
            lambda: self.current_lambda,
            all_rejected: outcome.all_rejected,
            injected_warm_start: outcome.injected_warm_start,
        })
    }
}
