//! Matrix expansion and execution.
//!
//! A matrix is (environment × mode × seed); each (environment, mode) pair is
//! a group that aggregates its seeds into one output directory. Cell seeds
//! are derived from the listed seed plus the cell's identity, so adding a
//! mode or an environment never perturbs another cell's stream.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;
use std::thread;

use sombrl::{
    estimate_oracle, regret_from_returns, run_experiment, substream, summarize_seeds,
    write_results_json, write_summary_csv, Error, ExperimentLog, ObjectiveMode, Result,
    ResultsBundle, RunConfig,
};

use crate::config::ExperimentConfig;

const MAX_WORKERS: usize = 8;

#[derive(Debug, Clone)]
pub struct Group {
    pub env_index: usize,
    pub env_name: String,
    pub mode: ObjectiveMode,
    pub dir: PathBuf,
}

#[derive(Debug, Clone)]
pub struct Cell {
    pub group: usize,
    pub seed: u64,
    pub run: RunConfig,
}

#[derive(Debug, Clone)]
pub struct MatrixPlan {
    pub configs: Vec<ExperimentConfig>,
    pub groups: Vec<Group>,
    pub cells: Vec<Cell>,
    pub out_root: PathBuf,
}

#[derive(Debug)]
pub struct GroupReport {
    pub env_name: String,
    pub mode: ObjectiveMode,
    pub dir: PathBuf,
    pub oracle: Option<f64>,
    pub final_median: Option<f64>,
    pub final_cum_regret: Option<f64>,
    pub failures: Vec<String>,
}

#[derive(Debug)]
pub struct MatrixReport {
    pub groups: Vec<GroupReport>,
    pub failed_cells: usize,
}

/// Expands configs × modes × seeds into a fully resolved plan. Every config
/// is validated up front; group directories are `<env>_<mode>` under the
/// output root.
pub fn expand_matrix(
    configs: &[ExperimentConfig],
    modes: &[ObjectiveMode],
    out_root: &Path,
) -> Result<MatrixPlan> {
    if configs.is_empty() {
        return Err(Error::Config("the matrix needs at least one environment config".into()));
    }
    if modes.is_empty() {
        return Err(Error::Config("the matrix needs at least one objective mode".into()));
    }
    for (i, mode) in modes.iter().enumerate() {
        if modes[..i].contains(mode) {
            return Err(Error::Config(format!("mode list repeats \"{mode}\"")));
        }
    }
    for (i, cfg) in configs.iter().enumerate() {
        cfg.validate()?;
        let name = cfg.env.family_name();
        if configs[..i].iter().any(|c| c.env.family_name() == name) {
            return Err(Error::Config(format!(
                "two configs target the environment \"{name}\"; their outputs would collide"
            )));
        }
    }
    let mut groups = Vec::new();
    let mut cells = Vec::new();
    for (env_index, cfg) in configs.iter().enumerate() {
        let env_name = cfg.env.family_name().to_string();
        for &mode in modes {
            let group = groups.len();
            groups.push(Group {
                env_index,
                env_name: env_name.clone(),
                mode,
                dir: out_root.join(format!("{}_{}", env_name, mode.name())),
            });
            let tag = format!("cell:{}:{}", env_name, mode.name());
            for &seed in &cfg.seeds {
                let cell_seed = substream(seed, &tag, 0);
                cells.push(Cell { group, seed, run: cfg.to_run_config(mode, cell_seed)? });
            }
        }
    }
    Ok(MatrixPlan {
        configs: configs.to_vec(),
        groups,
        cells,
        out_root: out_root.to_path_buf(),
    })
}

/// Human-readable expansion used by dry runs.
pub fn describe_plan(plan: &MatrixPlan) -> String {
    let mut out = String::new();
    let _ = writeln!(
        out,
        "matrix: {} group(s), {} cell(s), output root {}",
        plan.groups.len(),
        plan.cells.len(),
        plan.out_root.display()
    );
    for (gi, group) in plan.groups.iter().enumerate() {
        let cfg = &plan.configs[group.env_index];
        let seeds: Vec<String> = plan
            .cells
            .iter()
            .filter(|c| c.group == gi)
            .map(|c| c.seed.to_string())
            .collect();
        let _ = writeln!(
            out,
            "  {} mode={} regime={} episodes={} seeds=[{}] dir={}",
            group.env_name,
            group.mode.name(),
            cfg.run.regime.name(),
            cfg.run.episodes,
            seeds.join(", "),
            group.dir.display()
        );
    }
    out
}

fn run_cells(cells: &[Cell]) -> Vec<Result<ExperimentLog>> {
    let next = AtomicUsize::new(0);
    let slots: Vec<Mutex<Option<Result<ExperimentLog>>>> =
        (0..cells.len()).map(|_| Mutex::new(None)).collect();
    let workers = thread::available_parallelism()
        .map(usize::from)
        .unwrap_or(1)
        .min(cells.len())
        .clamp(1, MAX_WORKERS);
    thread::scope(|scope| {
        for _ in 0..workers {
            scope.spawn(|| loop {
                let i = next.fetch_add(1, Ordering::Relaxed);
                if i >= cells.len() {
                    break;
                }
                let outcome = run_experiment(&cells[i].run);
                *slots[i].lock().unwrap() = Some(outcome);
            });
        }
    });
    slots
        .into_iter()
        .map(|slot| slot.into_inner().unwrap().expect("every cell was executed"))
        .collect()
}

fn io_err(path: &Path, source: std::io::Error) -> Error {
    Error::Io { path: path.to_path_buf(), source }
}

fn aggregate_group(
    group: &Group,
    oracle: f64,
    logs: Vec<ExperimentLog>,
) -> Result<(f64, f64)> {
    let summary = summarize_seeds(&logs)?;
    let series = regret_from_returns(&summary.median_return, oracle);
    fs::create_dir_all(&group.dir).map_err(|e| io_err(&group.dir, e))?;
    write_summary_csv(&group.dir.join("summary.csv"), &summary, &series)?;
    let regime = logs[0].regime.clone();
    let bundle = ResultsBundle::new(
        group.env_name.clone(),
        group.mode.name(),
        regime,
        oracle,
        &summary,
        &series,
        logs,
    );
    write_results_json(&group.dir.join("results.json"), &bundle)?;
    let final_median = *summary.median_return.last().unwrap();
    let final_regret = *series.cumulative.last().unwrap();
    Ok((final_median, final_regret))
}

/// Runs every cell (worker pool, one experiment per cell), then aggregates
/// and writes each group. A failing cell is reported and skipped; the rest
/// of the matrix still runs.
pub fn execute_matrix(plan: &MatrixPlan) -> MatrixReport {
    let mut oracles: BTreeMap<usize, Result<f64>> = BTreeMap::new();
    for (env_index, cfg) in plan.configs.iter().enumerate() {
        let planner = cfg.planner.to_planner(ObjectiveMode::Mean, cfg.run.gamma);
        let seeds: Vec<u64> = (0..cfg.run.oracle_seeds as u64).collect();
        oracles.insert(env_index, estimate_oracle(&cfg.env, &planner, &seeds));
    }
    let mut outcomes: Vec<Option<Result<ExperimentLog>>> =
        run_cells(&plan.cells).into_iter().map(Some).collect();

    let mut groups = Vec::new();
    let mut failed_cells = 0usize;
    for (gi, group) in plan.groups.iter().enumerate() {
        let mut report = GroupReport {
            env_name: group.env_name.clone(),
            mode: group.mode,
            dir: group.dir.clone(),
            oracle: None,
            final_median: None,
            final_cum_regret: None,
            failures: Vec::new(),
        };
        let mut logs = Vec::new();
        for (ci, cell) in plan.cells.iter().enumerate() {
            if cell.group != gi {
                continue;
            }
            match outcomes[ci].take().expect("cell outcomes are consumed once") {
                Ok(log) => logs.push(log),
                Err(e) => {
                    failed_cells += 1;
                    report.failures.push(format!("seed {}: {e}", cell.seed));
                }
            }
        }
        let oracle = match &oracles[&group.env_index] {
            Ok(v) => *v,
            Err(e) => {
                report.failures.push(format!("oracle estimate failed: {e}"));
                failed_cells += logs.len();
                groups.push(report);
                continue;
            }
        };
        report.oracle = Some(oracle);
        if logs.is_empty() {
            groups.push(report);
            continue;
        }
        let produced = logs.len();
        match aggregate_group(group, oracle, logs) {
            Ok((final_median, final_regret)) => {
                report.final_median = Some(final_median);
                report.final_cum_regret = Some(final_regret);
            }
            Err(e) => {
                report.failures.push(format!("aggregation failed: {e}"));
                failed_cells += produced;
            }
        }
        groups.push(report);
    }
    MatrixReport { groups, failed_cells }
}

/// Console summary: one line per group with the final median return and
/// cumulative regret against the frozen oracle estimate.
pub fn render_table(report: &MatrixReport) -> String {
    let mut out = String::new();
    let _ = writeln!(
        out,
        "{:<14} {:<17} {:>17} {:>17}  {}",
        "env", "mode", "final_median", "cum_regret", "status"
    );
    for group in &report.groups {
        let fmt = |v: Option<f64>| v.map_or_else(|| "-".to_string(), |v| format!("{v:.6e}"));
        let status = if group.failures.is_empty() { "ok" } else { "failed" };
        let _ = writeln!(
            out,
            "{:<14} {:<17} {:>17} {:>17}  {}",
            group.env_name,
            group.mode.name(),
            fmt(group.final_median),
            fmt(group.final_cum_regret),
            status
        );
        for failure in &group.failures {
            let _ = writeln!(out, "    {failure}");
        }
    }
    if report.failed_cells > 0 {
        let _ = writeln!(out, "{} failed cell(s)", report.failed_cells);
    }
    out
}
