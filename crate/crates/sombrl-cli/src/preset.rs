//! Built-in experiment presets.

use sombrl::{
    EnvSpec, Error, ICemConfig, LambdaSchedule, ObjectiveMode, Result,
};

use crate::config::{ExperimentConfig, ModelSection, PlannerSection, RunSection};

#[derive(Debug, Clone)]
pub struct Preset {
    pub configs: Vec<ExperimentConfig>,
    pub modes: Vec<ObjectiveMode>,
}

pub const PRESET_NAMES: [&str; 1] = ["paper-gp"];

pub fn lookup(name: &str) -> Result<Preset> {
    match name {
        "paper-gp" => Ok(paper_gp()),
        other => Err(Error::Config(format!(
            "unknown preset \"{other}\"; available: {}",
            PRESET_NAMES.join(", ")
        ))),
    }
}

/// The comparison matrix: optimistic, mean, posterior-sample, and
/// hallucinated planning on pendulum and mountain car, five seeds each.
/// Sizes are trimmed so the full 40-cell matrix finishes in minutes on a
/// single core while keeping every pipeline stage representative.
pub fn paper_gp() -> Preset {
    let planner = PlannerSection {
        icem: ICemConfig {
            population: 24,
            elites: 6,
            iterations: 2,
            horizon: 8,
            ..ICemConfig::default()
        },
        mode: ObjectiveMode::Optimistic,
        lambda: LambdaSchedule::Constant { value: 10.0 },
        particles: 1,
    };
    let run = RunSection { episodes: 4, ..RunSection::default() };
    let model = ModelSection { data_cap: 120, ..ModelSection::default() };
    let seeds = vec![0, 1, 2, 3, 4];

    let pendulum = ExperimentConfig {
        env: EnvSpec::Pendulum {
            dt: 0.05,
            noise_std: 0.01,
            horizon: 24,
            reset_jitter: 0.05,
            action_cost_weight: 0.0,
        },
        run: run.clone(),
        planner: planner.clone(),
        model: model.clone(),
        seeds: seeds.clone(),
        output_dir: None,
    };
    let mountain_car = ExperimentConfig {
        env: EnvSpec::MountainCar {
            noise_std: 1e-3,
            horizon: 30,
            reset_jitter: 0.05,
            action_cost_weight: 0.0,
        },
        run,
        planner,
        model,
        seeds,
        output_dir: None,
    };

    Preset {
        configs: vec![pendulum, mountain_car],
        modes: ObjectiveMode::ALL.to_vec(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn paper_gp_expands_to_the_documented_matrix() {
        let preset = lookup("paper-gp").unwrap();
        let env_names: Vec<&str> =
            preset.configs.iter().map(|c| c.env.family_name()).collect();
        assert_eq!(env_names, vec!["pendulum", "mountain_car"]);
        assert_eq!(preset.modes, ObjectiveMode::ALL.to_vec());
        for cfg in &preset.configs {
            assert_eq!(cfg.seeds.len(), 5);
            cfg.validate().unwrap();
        }
    }

    #[test]
    fn unknown_presets_are_named_in_the_error() {
        let err = lookup("nope").unwrap_err();
        assert!(err.to_string().contains("nope"), "{err}");
        assert!(err.to_string().contains("paper-gp"), "{err}");
    }
}
