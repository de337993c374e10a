//! Experiment matrix front end for the `sombrl` library: config files,
//! presets, and (environment × mode × seed) fan-out with per-group
//! aggregation.

pub mod config;
pub mod matrix;
pub mod preset;

pub use config::{
    parse_config, parse_mode_arg, parse_seed_arg, resolve_output_dir, ExperimentConfig,
    ModelSection, PlannerSection, RunSection,
};
pub use matrix::{
    describe_plan, execute_matrix, expand_matrix, render_table, Cell, Group, GroupReport,
    MatrixPlan, MatrixReport,
};
pub use preset::Preset;
