//! Experiment orchestration: the agent alternates between fitting the model
//! on everything observed so far and deploying the planner, under four
//! interaction regimes — fixed-horizon episodic, discounted with growing
//! horizons, nonepisodic with information-triggered updates, and pure
//! exploration — plus oracle value estimation for regret reports.

use std::collections::VecDeque;
use std::time::Instant;

use nalgebra::{DMatrix, DVector};
use rand::SeedableRng;
use rand_chacha::ChaCha12Rng;
use serde::{Deserialize, Serialize};

use crate::calibrated::{CalibratedModel, ModelConfig};
use crate::env::{env_step, Env, EnvSpec};
use crate::error::{Error, Result};
use crate::gp::Dataset;
use crate::metrics::median;
use crate::planner::{
    evaluate_true_batch, icem_plan, lambda_autotune_step, LambdaSchedule, MpcPlanner,
    ObjectiveMode, PlannerConfig,
};
use crate::seed::substream;

/// Forced nonepisodic model update after this many steps without a trigger.
pub const NONEPISODIC_HARD_CAP: usize = 500;
/// Discounted returns stop accumulating once γᵗ·r_max drops below this.
pub const DISCOUNT_TAIL_TOL: f64 = 1e-4;
/// The auto-tune target policy lags the current one by this many episodes.
const AUTOTUNE_LAG: usize = 3;
/// States replayed per episode when auto-tuning λ.
const AUTOTUNE_REPLAY: usize = 10;

fn default_trigger_threshold() -> f64 {
    std::f64::consts::LN_2
}

fn default_min_horizon() -> usize {
    1
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "snake_case", deny_unknown_fields)]
pub enum Regime {
    /// Fixed-horizon episodes with a reset and a model update after each.
    Episodic,
    /// Episode n runs for `horizon_schedule(n, γ)` steps; returns are
    /// γ-discounted.
    Discounted { gamma: f64 },
    /// One unbroken trajectory; the model and policy change only when the
    /// accumulated information since the last update exceeds the threshold
    /// (in nats), subject to a minimum segment length and a hard cap.
    Nonepisodic {
        #[serde(default = "default_trigger_threshold")]
        trigger_threshold: f64,
        #[serde(default = "default_min_horizon")]
        min_horizon: usize,
    },
    /// Episodic interaction with the extrinsic reward zeroed inside the
    /// planner (λ fixed to 1); logged returns still use the true reward.
    PureExploration,
}

impl Default for Regime {
    fn default() -> Self {
        Regime::Episodic
    }
}

impl Regime {
    pub fn name(&self) -> &'static str {
        match self {
            Regime::Episodic => "episodic",
            Regime::Discounted { .. } => "discounted",
            Regime::Nonepisodic { .. } => "nonepisodic",
            Regime::PureExploration => "pure_exploration",
        }
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            Regime::Episodic | Regime::PureExploration => Ok(()),
            Regime::Discounted { gamma } => {
                if !(gamma.is_finite() && *gamma > 0.0 && *gamma < 1.0) {
                    return Err(Error::Config("regime gamma must lie in (0, 1)".into()));
                }
                Ok(())
            }
            Regime::Nonepisodic { trigger_threshold, min_horizon } => {
                if !(*trigger_threshold > 0.0) {
                    return Err(Error::Config(
                        "regime trigger_threshold must be positive".into(),
                    ));
                }
                if *min_horizon == 0 {
                    return Err(Error::Config("regime min_horizon must be at least 1".into()));
                }
                Ok(())
            }
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(default)]
    pub regime: Regime,
    pub episodes: usize,
    pub env: EnvSpec,
    #[serde(default)]
    pub planner: PlannerConfig,
    pub model: ModelConfig,
    #[serde(default)]
    pub seed: u64,
}

impl RunConfig {
    pub fn validate(&self) -> Result<()> {
        if self.episodes == 0 {
            return Err(Error::Config("run episodes must be at least 1".into()));
        }
        self.regime.validate()?;
        self.env.validate()?;
        self.planner.validate()?;
        self.model.validate()?;
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpisodeRecord {
    pub episode: usize,
    /// Undiscounted sum of true rewards, or the truncated J_γ under the
    /// discounted regime.
    #[serde(rename = "return")]
    pub ret: f64,
    /// Sum over steps of ‖σ_{n−1}(x_t, u_t)‖₂ at the executed pairs.
    pub intrinsic_return: f64,
    pub length: usize,
    pub lambda: f64,
    /// Model information gain Γ accumulated up to and including this
    /// episode's update.
    pub info_gain: f64,
    #[serde(skip)]
    pub wall_time: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StepRecord {
    pub step: usize,
    pub reward: f64,
    /// ‖σ_{n−1}(x_t, u_t)‖₂ under the model in force at this step.
    pub uncertainty_norm: f64,
    /// This step's trigger contribution Σ_j ln(1 + σ²_j / σ²_noise).
    pub step_gain: f64,
    /// A model update fired at the end of this step.
    pub triggered: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentLog {
    pub env_name: String,
    pub mode: String,
    pub regime: String,
    pub seed: u64,
    pub episodes: Vec<EpisodeRecord>,
    /// Per-step trace; populated only by the nonepisodic regime.
    pub steps: Vec<StepRecord>,
    /// Set when a model failure ended the run early; the log up to that
    /// point is still valid.
    pub aborted: Option<String>,
}

/// Growing-horizon schedule for the discounted regime: max(1, ⌈−ln n/ln γ⌉).
pub fn horizon_schedule(n: usize, gamma: f64) -> usize {
    assert!(n >= 1, "episode numbering starts at 1");
    assert!(gamma > 0.0 && gamma < 1.0, "gamma must lie in (0, 1)");
    let t = -((n as f64).ln()) / gamma.ln();
    (t.ceil() as usize).max(1)
}

/// True when the information accumulated since the last update exceeds the
/// threshold: Σ_k Σ_j ln(1 + σ²_{n−1,j}(z_k)/σ²_noise) > threshold, with a
/// strict inequality, or when the hard step cap is reached. `accumulated`
/// holds one per-dimension posterior-variance vector per step.
pub fn update_trigger(
    accumulated: &[DVector<f64>],
    noise_variance: f64,
    threshold: f64,
) -> bool {
    if accumulated.is_empty() {
        return false;
    }
    if accumulated.len() >= NONEPISODIC_HARD_CAP {
        return true;
    }
    let total: f64 = accumulated
        .iter()
        .flat_map(|vars| vars.iter())
        .map(|var| (1.0 + var / noise_variance).ln())
        .sum();
    total > threshold
}

/// First step index whose discounted reward can no longer matter.
fn discount_cutoff(gamma: f64, r_max: f64) -> usize {
    if r_max <= 0.0 {
        return usize::MAX;
    }
    let t = (DISCOUNT_TAIL_TOL / r_max).ln() / gamma.ln();
    if t.is_finite() && t >= 0.0 {
        t.ceil() as usize
    } else {
        usize::MAX
    }
}

fn stack_query(state: &DVector<f64>, action: &DVector<f64>) -> DVector<f64> {
    let mut z = DVector::zeros(state.len() + action.len());
    z.rows_mut(0, state.len()).copy_from(state);
    z.rows_mut(state.len(), action.len()).copy_from(action);
    z
}

struct AutotuneSnapshot {
    model: CalibratedModel,
    lambda: f64,
}

/// Builds the environment from the spec and runs the experiment.
pub fn run_experiment(cfg: &RunConfig) -> Result<ExperimentLog> {
    let mut env = cfg.env.build()?;
    run_with_env(cfg, env.as_mut())
}

/// Runs on a caller-supplied environment (synthetic systems enter here).
pub fn run_with_env(cfg: &RunConfig, env: &mut dyn Env) -> Result<ExperimentLog> {
    run_with_env_observed(cfg, env, &mut |_, _| {})
}

/// Like [`run_with_env`], invoking `observer(episode, model)` after every
/// model update.
pub fn run_with_env_observed(
    cfg: &RunConfig,
    env: &mut dyn Env,
    observer: &mut dyn FnMut(usize, &CalibratedModel),
) -> Result<ExperimentLog> {
    cfg.validate()?;
    let d_x = env.state_dim();
    let d_u = env.action_dim();
    if cfg.model.kernel.input_dim != d_x + d_u {
        return Err(Error::Config(format!(
            "model kernel input_dim {} must equal state_dim + action_dim = {}",
            cfg.model.kernel.input_dim,
            d_x + d_u
        )));
    }
    if cfg.model.output_dim != d_x {
        return Err(Error::Config(format!(
            "model output_dim {} must equal state_dim {}",
            cfg.model.output_dim, d_x
        )));
    }

    let model = CalibratedModel::new(cfg.model.clone())?;
    let mut planner_cfg = cfg.planner.clone();
    match &cfg.regime {
        Regime::Discounted { gamma } => planner_cfg.gamma = *gamma,
        Regime::PureExploration => {
            planner_cfg.mode = ObjectiveMode::Optimistic;
            planner_cfg.lambda = LambdaSchedule::Constant { value: 1.0 };
        }
        _ => {}
    }
    let mut planner = MpcPlanner::new(planner_cfg.clone(), env, substream(cfg.seed, "planner", 0))?;
    if matches!(cfg.regime, Regime::PureExploration) {
        planner.set_zero_reward(true);
    }
    let env_rng = ChaCha12Rng::seed_from_u64(substream(cfg.seed, "env", 0));

    let mut run = RunState {
        cfg,
        model,
        planner,
        env_rng,
        log: ExperimentLog {
            env_name: env.name().to_string(),
            mode: planner_cfg.mode.name().to_string(),
            regime: cfg.regime.name().to_string(),
            seed: cfg.seed,
            episodes: Vec::new(),
            steps: Vec::new(),
            aborted: None,
        },
    };
    match cfg.regime {
        Regime::Nonepisodic { trigger_threshold, min_horizon } => {
            run.nonepisodic(env, trigger_threshold, min_horizon, observer)?;
        }
        _ => run.episodic_family(env, observer)?,
    }
    Ok(run.log)
}

struct RunState<'a> {
    cfg: &'a RunConfig,
    model: CalibratedModel,
    planner: MpcPlanner,
    env_rng: ChaCha12Rng,
    log: ExperimentLog,
}

impl RunState<'_> {
    fn episode_horizon(&self, env: &dyn Env, episode: usize) -> usize {
        match self.cfg.regime {
            Regime::Discounted { gamma } => horizon_schedule(episode + 1, gamma),
            _ => env.horizon(),
        }
    }

    fn fresh_batch(&self, env: &dyn Env) -> Dataset {
        Dataset::new(
            env.state_dim() + env.action_dim(),
            env.state_dim(),
            self.cfg.model.noise_variance,
        )
    }

    fn episodic_family(
        &mut self,
        env: &mut dyn Env,
        observer: &mut dyn FnMut(usize, &CalibratedModel),
    ) -> Result<()> {
        let autotune_step = match self.cfg.planner.lambda {
            LambdaSchedule::AutoTune { step_size, .. } => Some(step_size),
            _ => None,
        };
        let mut snapshots: VecDeque<AutotuneSnapshot> = VecDeque::new();

        for episode in 0..self.cfg.episodes {
            let started = Instant::now();
            let horizon = self.episode_horizon(env, episode);
            let mut state = env.reset(&mut self.env_rng);
            self.planner.begin_episode(episode, self.model.beta());
            let lambda_used = self.planner.current_lambda();

            let mut batch = self.fresh_batch(env);
            let mut ret = 0.0;
            let mut intrinsic = 0.0;
            let mut replay: Vec<(DVector<f64>, DVector<f64>)> = Vec::new();
            let replay_stride = (horizon / AUTOTUNE_REPLAY).max(1);
            let (mut discount, gamma, tail) = match self.cfg.regime {
                Regime::Discounted { gamma } => (1.0, gamma, discount_cutoff(gamma, env.r_max())),
                _ => (1.0, 1.0, usize::MAX),
            };

            for t in 0..horizon {
                let act = self.planner.act(&self.model, env, &state, episode)?;
                let z = stack_query(&state, &act.action);
                let (_, sigma, _) = self.model.predict_confidence(&z);
                intrinsic += sigma.norm();
                if autotune_step.is_some()
                    && t % replay_stride == 0
                    && replay.len() < AUTOTUNE_REPLAY
                {
                    replay.push((state.clone(), act.action.clone()));
                }
                let (next, reward) = env_step(env, &state, &act.action, &mut self.env_rng)?;
                if t < tail {
                    ret += discount * reward;
                }
                batch.push(z, env.residual(&state, &next))?;
                state = next;
                discount *= gamma;
            }

            if let Err(err) = self.model.update(&batch) {
                self.log.aborted = Some(format!("model update failed after episode {episode}: {err}"));
                return Ok(());
            }
            observer(episode, &self.model);

            if let Some(step_size) = autotune_step {
                if snapshots.len() == AUTOTUNE_LAG {
                    let lagged = snapshots.front().expect("nonempty deque");
                    self.autotune_lambda(env, episode, &replay, lagged, step_size)?;
                }
                snapshots.push_back(AutotuneSnapshot {
                    model: self.model.clone(),
                    lambda: self.planner.current_lambda(),
                });
                if snapshots.len() > AUTOTUNE_LAG {
                    snapshots.pop_front();
                }
            }

            self.log.episodes.push(EpisodeRecord {
                episode,
                ret,
                intrinsic_return: intrinsic,
                length: horizon,
                lambda: lambda_used,
                info_gain: self.model.information_gain(),
                wall_time: started.elapsed().as_secs_f64(),
            });
        }
        Ok(())
    }

    /// One λ gradient step: compare the executed policy's uncertainties
    /// against those of actions a lagged planner snapshot proposes on the
    /// same replayed states, both measured with the current model.
    fn autotune_lambda(
        &mut self,
        env: &dyn Env,
        episode: usize,
        replay: &[(DVector<f64>, DVector<f64>)],
        lagged: &AutotuneSnapshot,
        step_size: f64,
    ) -> Result<()> {
        if replay.is_empty() {
            return Ok(());
        }
        let mut target_planner = MpcPlanner::new(
            self.planner.config().clone(),
            env,
            substream(self.cfg.seed, "autotune", episode as u64),
        )?;
        target_planner.begin_episode(episode, lagged.model.beta());
        target_planner.set_lambda(lagged.lambda);

        let mut sigma_current = Vec::with_capacity(replay.len());
        let mut sigma_target = Vec::with_capacity(replay.len());
        for (state, action) in replay {
            let (_, sigma, _) = self.model.predict_confidence(&stack_query(state, action));
            sigma_current.push(sigma.norm());
            let proposal = target_planner.act(&lagged.model, env, state, episode.max(1))?;
            let (_, sigma, _) =
                self.model.predict_confidence(&stack_query(state, &proposal.action));
            sigma_target.push(sigma.norm());
        }
        let next = lambda_autotune_step(
            self.planner.current_lambda(),
            &sigma_current,
            &sigma_target,
            step_size,
        );
        self.planner.set_lambda(next);
        Ok(())
    }

    fn nonepisodic(
        &mut self,
        env: &mut dyn Env,
        trigger_threshold: f64,
        min_horizon: usize,
        observer: &mut dyn FnMut(usize, &CalibratedModel),
    ) -> Result<()> {
        let total_steps = self.cfg.episodes * env.horizon();
        let noise_variance = self.cfg.model.noise_variance;
        let mut state = env.reset(&mut self.env_rng);
        let mut segment = 0usize;
        self.planner.begin_episode(segment, self.model.beta());
        let mut segment_lambda = self.planner.current_lambda();
        let mut batch = self.fresh_batch(env);
        let mut accumulated: Vec<DVector<f64>> = Vec::new();
        let mut segment_return = 0.0;
        let mut segment_intrinsic = 0.0;
        let mut segment_started = Instant::now();
        let mut had_first_update = false;

        for step in 0..total_steps {
            let act = self.planner.act(&self.model, env, &state, segment)?;
            let z = stack_query(&state, &act.action);
            let (_, sigma, _) = self.model.predict_confidence(&z);
            let step_gain: f64 = sigma
                .iter()
                .map(|s| (1.0 + s * s / noise_variance).ln())
                .sum();
            accumulated.push(sigma.map(|s| s * s));
            segment_intrinsic += sigma.norm();

            let (next, reward) = env_step(env, &state, &act.action, &mut self.env_rng)?;
            segment_return += reward;
            batch.push(z, env.residual(&state, &next))?;
            state = next;

            let since_update = accumulated.len();
            let fire = if since_update < min_horizon {
                false
            } else if !had_first_update {
                true
            } else {
                update_trigger(&accumulated, noise_variance, trigger_threshold)
            };
            self.log.steps.push(StepRecord {
                step,
                reward,
                uncertainty_norm: sigma.norm(),
                step_gain,
                triggered: fire,
            });

            if fire {
                if let Err(err) = self.model.update(&batch) {
                    self.log.aborted =
                        Some(format!("model update failed at step {step}: {err}"));
                    break;
                }
                had_first_update = true;
                observer(segment, &self.model);
                self.log.episodes.push(EpisodeRecord {
                    episode: segment,
                    ret: segment_return,
                    intrinsic_return: segment_intrinsic,
                    length: accumulated.len(),
                    lambda: segment_lambda,
                    info_gain: self.model.information_gain(),
                    wall_time: segment_started.elapsed().as_secs_f64(),
                });
                segment += 1;
                batch = self.fresh_batch(env);
                accumulated.clear();
                segment_return = 0.0;
                segment_intrinsic = 0.0;
                segment_started = Instant::now();
                self.planner.begin_episode(segment, self.model.beta());
                segment_lambda = self.planner.current_lambda();
            }
        }

        if !accumulated.is_empty() {
            self.log.episodes.push(EpisodeRecord {
                episode: segment,
                ret: segment_return,
                intrinsic_return: segment_intrinsic,
                length: accumulated.len(),
                lambda: segment_lambda,
                info_gain: self.model.information_gain(),
                wall_time: segment_started.elapsed().as_secs_f64(),
            });
        }
        Ok(())
    }
}

/// Return of one episode planned directly on the noise-free true dynamics
/// with λ = 0, executed in the stochastic environment.
pub fn oracle_return(env: &mut dyn Env, planner_cfg: &PlannerConfig, seed: u64) -> Result<f64> {
    let mut env_rng = ChaCha12Rng::seed_from_u64(substream(seed, "oracle_env", 0));
    let mut plan_rng = ChaCha12Rng::seed_from_u64(substream(seed, "oracle_plan", 0));
    let steps = env.horizon();
    let mut state = env.reset(&mut env_rng);
    let env: &dyn Env = env;
    let low: Vec<f64> = env.action_low().iter().copied().collect();
    let high: Vec<f64> = env.action_high().iter().copied().collect();
    let mut warm: Option<DMatrix<f64>> = None;
    let mut total = 0.0;
    for _ in 0..steps {
        let mut objective =
            |cands: &[DMatrix<f64>]| evaluate_true_batch(env, &state, cands, planner_cfg.gamma);
        let outcome = icem_plan(
            &mut objective,
            &planner_cfg.icem,
            &low,
            &high,
            warm.as_ref(),
            &mut plan_rng,
        )?;
        let action = outcome.actions.column(0).into_owned();
        warm = Some(outcome.actions);
        let (next, reward) = env_step(env, &state, &action, &mut env_rng)?;
        total += reward;
        state = next;
    }
    Ok(total)
}

/// Median episodic return over seeds when planning on the true dynamics;
/// stands in for J(π*) in regret reports and is labeled an estimate.
pub fn estimate_oracle(
    spec: &EnvSpec,
    planner_cfg: &PlannerConfig,
    seeds: &[u64],
) -> Result<f64> {
    if seeds.is_empty() {
        return Err(Error::Config("oracle estimation needs at least one seed".into()));
    }
    let mut returns = Vec::with_capacity(seeds.len());
    for &seed in seeds {
        let mut env = spec.build()?;
        returns.push(oracle_return(env.as_mut(), planner_cfg, seed)?);
    }
    Ok(median(&returns))
}
