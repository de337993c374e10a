//! Experiment files and flag handling.
//!
//! A config file describes one environment plus the run, planner, and model
//! settings shared by every cell it expands into. Precedence is documented
//! defaults, then file values, then command-line flags.

use std::ffi::OsString;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sombrl::{
    BetaSchedule, EnvSpec, Error, ICemConfig, KernelFamily, KernelSpec, LambdaSchedule,
    ModelConfig, ObjectiveMode, PlannerConfig, Regime, Result, RunConfig,
};

/// One experiment file: the environment, shared settings, and the seed list
/// the matrix expands over.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub env: EnvSpec,
    #[serde(default)]
    pub run: RunSection,
    #[serde(default)]
    pub planner: PlannerSection,
    #[serde(default)]
    pub model: ModelSection,
    #[serde(default = "default_seeds")]
    pub seeds: Vec<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output_dir: Option<PathBuf>,
}

fn default_seeds() -> Vec<u64> {
    vec![0, 1, 2, 3, 4]
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunSection {
    pub regime: Regime,
    pub episodes: usize,
    /// Planning discount; the discounted regime replaces it with its own γ.
    pub gamma: f64,
    /// Seeds spent on the frozen oracle estimate each cell's regret is
    /// measured against.
    pub oracle_seeds: usize,
}

impl Default for RunSection {
    fn default() -> Self {
        Self { regime: Regime::default(), episodes: 20, gamma: 1.0, oracle_seeds: 3 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PlannerSection {
    pub icem: ICemConfig,
    pub mode: ObjectiveMode,
    pub lambda: LambdaSchedule,
    pub particles: usize,
}

impl Default for PlannerSection {
    fn default() -> Self {
        let base = PlannerConfig::default();
        Self { icem: base.icem, mode: base.mode, lambda: base.lambda, particles: base.particles }
    }
}

impl PlannerSection {
    pub fn to_planner(&self, mode: ObjectiveMode, gamma: f64) -> PlannerConfig {
        PlannerConfig {
            icem: self.icem.clone(),
            mode,
            lambda: self.lambda.clone(),
            gamma,
            particles: self.particles,
        }
    }
}

/// Model knobs exposed to config files. The kernel input dimension is always
/// derived from the environment (state dim + action dim), so only the
/// isotropic hyperparameters appear here.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ModelSection {
    pub kernel_family: KernelFamily,
    pub lengthscale: f64,
    pub signal_variance: f64,
    pub noise_variance: f64,
    pub beta: BetaSchedule,
    pub data_cap: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub refit_every: Option<usize>,
    pub refit_subsample: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub rkhs_bound: Option<f64>,
}

impl Default for ModelSection {
    fn default() -> Self {
        Self {
            kernel_family: KernelFamily::Rbf,
            lengthscale: 1.0,
            signal_variance: 1.0,
            noise_variance: 1e-4,
            beta: BetaSchedule::default(),
            data_cap: 400,
            refit_every: None,
            refit_subsample: 256,
            rkhs_bound: None,
        }
    }
}

impl ModelSection {
    pub fn to_model(&self, input_dim: usize, output_dim: usize) -> Result<ModelConfig> {
        let kernel = KernelSpec::isotropic(
            self.kernel_family,
            input_dim,
            self.lengthscale,
            self.signal_variance,
        )?;
        let mut cfg = ModelConfig::new(kernel, output_dim, self.noise_variance);
        cfg.beta = self.beta.clone();
        cfg.data_cap = self.data_cap;
        cfg.refit_every = self.refit_every;
        cfg.refit_subsample = self.refit_subsample;
        cfg.rkhs_bound = self.rkhs_bound;
        Ok(cfg)
    }
}

impl ExperimentConfig {
    /// Checks every field, naming the offending key and its constraint.
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| -> Result<()> { Err(Error::Config(msg)) };
        self.env.validate()?;
        if self.run.episodes == 0 {
            return bad("run.episodes must be at least 1".into());
        }
        if !(self.run.gamma.is_finite() && self.run.gamma > 0.0 && self.run.gamma <= 1.0) {
            return bad(format!("run.gamma must lie in (0, 1], got {}", self.run.gamma));
        }
        if self.run.oracle_seeds == 0 {
            return bad("run.oracle_seeds must be at least 1".into());
        }
        self.run
            .regime
            .validate()
            .map_err(|e| Error::Config(format!("run.regime: {e}")))?;
        self.planner
            .icem
            .validate()
            .map_err(|e| Error::Config(format!("planner.icem: {e}")))?;
        if self.planner.particles == 0 {
            return bad("planner.particles must be at least 1".into());
        }
        self.planner
            .lambda
            .validate()
            .map_err(|e| Error::Config(format!("planner.lambda: {e}")))?;
        if !(self.model.lengthscale.is_finite() && self.model.lengthscale > 0.0) {
            return bad("model.lengthscale must be positive".into());
        }
        if !(self.model.signal_variance.is_finite() && self.model.signal_variance > 0.0) {
            return bad("model.signal_variance must be positive".into());
        }
        if !(self.model.noise_variance.is_finite() && self.model.noise_variance > 0.0) {
            return bad("model.noise_variance must be positive".into());
        }
        if self.model.data_cap == 0 {
            return bad("model.data_cap must be at least 1".into());
        }
        if self.model.refit_subsample == 0 {
            return bad("model.refit_subsample must be at least 1".into());
        }
        if let Some(b) = self.model.rkhs_bound {
            if !(b.is_finite() && b > 0.0) {
                return bad("model.rkhs_bound must be positive".into());
            }
        }
        self.model
            .beta
            .validate()
            .map_err(|e| Error::Config(format!("model.beta: {e}")))?;
        if self.seeds.is_empty() {
            return bad("seeds must list at least one seed".into());
        }
        let mut sorted = self.seeds.clone();
        sorted.sort_unstable();
        if sorted.windows(2).any(|w| w[0] == w[1]) {
            return bad("seeds must be distinct".into());
        }
        Ok(())
    }

    /// Resolves one matrix cell into the runner's config.
    pub fn to_run_config(&self, mode: ObjectiveMode, cell_seed: u64) -> Result<RunConfig> {
        let env = self.env.build()?;
        let input_dim = env.state_dim() + env.action_dim();
        let model = self.model.to_model(input_dim, env.state_dim())?;
        Ok(RunConfig {
            regime: self.run.regime.clone(),
            episodes: self.run.episodes,
            env: self.env.clone(),
            planner: self.planner.to_planner(mode, self.run.gamma),
            model,
            seed: cell_seed,
        })
    }
}

/// Reads and fully validates a TOML experiment file.
pub fn parse_config(path: &Path) -> Result<ExperimentConfig> {
    let text = fs::read_to_string(path)
        .map_err(|source| Error::Io { path: path.to_path_buf(), source })?;
    let cfg: ExperimentConfig = toml::from_str(&text)
        .map_err(|e| Error::Parse { path: path.to_path_buf(), message: e.to_string() })?;
    cfg.validate()?;
    Ok(cfg)
}

/// `--seeds` accepts a count (`5` expands to seeds 0..5) or an explicit
/// comma-separated list (`3,9,11`).
pub fn parse_seed_arg(arg: &str) -> Result<Vec<u64>> {
    let invalid = || {
        Error::Config(format!(
            "--seeds expects a count or a comma-separated list of integers, got \"{arg}\""
        ))
    };
    let parts: Vec<&str> = arg.split(',').map(str::trim).collect();
    if parts.len() == 1 {
        let n: u64 = parts[0].parse().map_err(|_| invalid())?;
        if n == 0 {
            return Err(Error::Config("--seeds count must be at least 1".into()));
        }
        Ok((0..n).collect())
    } else {
        parts
            .iter()
            .map(|p| p.parse().map_err(|_| invalid()))
            .collect()
    }
}

/// `--mode` accepts a comma-separated list of objective mode names.
pub fn parse_mode_arg(arg: &str) -> Result<Vec<ObjectiveMode>> {
    arg.split(',')
        .map(str::trim)
        .map(|name| {
            name.parse::<ObjectiveMode>()
                .map_err(|e| Error::Config(format!("--mode: {e}")))
        })
        .collect()
}

/// Output root precedence: `--out` flag, then the config file's
/// `output_dir`, then `$SOMBRL_OUT`, then `./out`.
pub fn resolve_output_dir(
    flag: Option<PathBuf>,
    file: Option<PathBuf>,
    env_var: Option<OsString>,
) -> PathBuf {
    flag.or(file)
        .or_else(|| env_var.map(PathBuf::from))
        .unwrap_or_else(|| PathBuf::from("out"))
}
