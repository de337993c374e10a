//! Model-based reinforcement learning with Gaussian-process dynamics models.
//!
//! The agent alternates between two steps: fit a GP posterior over the
//! transition residuals of everything observed so far, then plan through the
//! model with an intrinsic exploration bonus, maximizing extrinsic reward
//! plus a λ-weighted norm of the model's epistemic uncertainty. Episodic,
//! discounted, nonepisodic, and pure-exploration interaction regimes share
//! the same model and planner stack.
//!
//! Module map:
//!
//! * [`kernel`], [`gp`], [`hyperfit`]: exact GP regression per output
//!   dimension, marginal-likelihood fitting, information gain.
//! * [`calibrated`], [`qp`]: the calibrated model `M_n` (posterior + β_n)
//!   and the bounded-RKHS-norm weight projection.
//! * [`env`]: Pendulum, MountainCar, and synthetic GP-sampled systems.
//! * [`planner`]: iCEM trajectory optimization over optimistic, mean,
//!   posterior-sample, and hallucinated rollout objectives; λ schedules.
//! * [`runner`]: the four interaction regimes and oracle estimation.
//! * [`metrics`]: regret series, seed aggregation, CSV/JSON export.

pub mod calibrated;
pub mod env;
pub mod error;
pub mod gp;
pub mod hyperfit;
pub mod kernel;
pub mod metrics;
pub mod planner;
pub mod qp;
pub mod runner;
pub mod schema;
pub mod seed;

pub use calibrated::{beta_schedule, BetaSchedule, CalibratedModel, ModelConfig};
pub use env::{clip_action, env_step, Env, EnvSpec, MountainCar, Pendulum, SyntheticEnv};
pub use error::{Error, Result};
pub use gp::{information_gain, log_marginal_likelihood, Dataset, GpPosterior, DEFAULT_DATA_CAP};
pub use hyperfit::{fit_hyperparameters, HyperBounds, HyperFitOptions, HyperFitOutcome};
pub use kernel::{KernelFamily, KernelSpec};
pub use metrics::{
    cumulative_regret, export_results, median, read_results_json, read_summary_csv,
    regret_from_returns, summarize_seeds, summary_rows, write_results_json, write_summary_csv,
    ExportFormat, RegretSeries, ResultsBundle, SeedSummary, SummaryRow, CSV_HEADER,
};
pub use planner::{
    colored_noise, evaluate_batch, evaluate_objective, evaluate_true_batch, icem_plan,
    lambda_autotune_step, lambda_value, shift_sequence, ActOutcome, ICemConfig, LambdaSchedule,
    MpcPlanner, ObjectiveMode, PlanOutcome, PlannerConfig, RolloutContext,
};
pub use qp::{lipschitz_project, project_weights, projection_objective, QpSolution};
pub use runner::{
    estimate_oracle, horizon_schedule, oracle_return, run_experiment, run_with_env,
    run_with_env_observed, update_trigger, EpisodeRecord, ExperimentLog, Regime, RunConfig,
    StepRecord, DISCOUNT_TAIL_TOL, NONEPISODIC_HARD_CAP,
};
pub use schema::validate_schema;
pub use seed::substream;
