//! Command-line entry point: expands the experiment matrix and runs it.
//!
//! Exit codes: 0 on success, 1 for configuration errors, 2 when one or more
//! cells failed at runtime.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::Parser;

use sombrl::{Error, Result};
use sombrl_cli::config::{parse_config, parse_mode_arg, parse_seed_arg, resolve_output_dir};
use sombrl_cli::matrix::{describe_plan, execute_matrix, expand_matrix, render_table};
use sombrl_cli::preset;

/// Runs an (environment × mode × seed) experiment matrix and writes one
/// aggregated summary per (environment, mode) group.
#[derive(Debug, Parser)]
#[command(name = "sombrl", version)]
struct Cli {
    /// TOML experiment config file.
    #[arg(long, value_name = "PATH")]
    config: Option<PathBuf>,

    /// Objective modes to run, comma separated: optimistic, mean,
    /// posterior_sample, hallucinated. Defaults to the config's mode.
    #[arg(long, value_name = "NAME,...")]
    mode: Option<String>,

    /// Seed count (`5` runs seeds 0..5) or an explicit list (`3,9,11`).
    #[arg(long, value_name = "N|LIST")]
    seeds: Option<String>,

    /// Output root; falls back to the config's output_dir, then $SOMBRL_OUT,
    /// then ./out.
    #[arg(long, value_name = "DIR")]
    out: Option<PathBuf>,

    /// Built-in experiment preset (paper-gp).
    #[arg(long, value_name = "NAME")]
    preset: Option<String>,

    /// Print the expanded matrix and exit without running or writing
    /// anything.
    #[arg(long)]
    plan: bool,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(code) => code,
        Err(err) => {
            eprintln!("error: {err}");
            ExitCode::from(1)
        }
    }
}

fn run(cli: Cli) -> Result<ExitCode> {
    let (mut configs, mut modes) = match (&cli.preset, &cli.config) {
        (Some(_), Some(_)) => {
            return Err(Error::Config(
                "--preset and --config are mutually exclusive".into(),
            ))
        }
        (Some(name), None) => {
            let preset = preset::lookup(name)?;
            (preset.configs, preset.modes)
        }
        (None, Some(path)) => {
            let cfg = parse_config(path)?;
            let modes = vec![cfg.planner.mode];
            (vec![cfg], modes)
        }
        (None, None) => {
            return Err(Error::Config(
                "one of --config or --preset is required".into(),
            ))
        }
    };

    if let Some(arg) = &cli.mode {
        modes = parse_mode_arg(arg)?;
    }
    if let Some(arg) = &cli.seeds {
        let seeds = parse_seed_arg(arg)?;
        for cfg in &mut configs {
            cfg.seeds = seeds.clone();
        }
    }
    let out_root = resolve_output_dir(
        cli.out.clone(),
        configs[0].output_dir.clone(),
        std::env::var_os("SOMBRL_OUT"),
    );

    let plan = expand_matrix(&configs, &modes, &out_root)?;
    if cli.plan {
        print!("{}", describe_plan(&plan));
        println!("dry run: nothing executed, no files written");
        return Ok(ExitCode::SUCCESS);
    }

    let report = execute_matrix(&plan);
    print!("{}", render_table(&report));
    if report.failed_cells > 0 {
        Ok(ExitCode::from(2))
    } else {
        Ok(ExitCode::SUCCESS)
    }
}
