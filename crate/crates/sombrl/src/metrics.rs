//! Regret series, seed aggregation, and durable CSV/JSON export.
//!
//! CSV is the episode-level artifact consumers plot; JSON bundles carry the
//! full per-seed logs, including per-step nonepisodic traces. Floats are
//! serialized with 17 significant digits so both formats round-trip exactly.

use std::fs::File;
use std::io::{self, BufReader, BufWriter, Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::runner::ExperimentLog;

pub const CSV_HEADER: &str = "episode,median_return,std_return,cum_regret,info_gain,lambda";

/// Median of a nonempty slice; the even case averages the middle pair.
pub fn median(values: &[f64]) -> f64 {
    assert!(!values.is_empty(), "median of an empty slice");
    let mut sorted = values.to_vec();
    sorted.sort_by(|a, b| a.partial_cmp(b).expect("comparable values"));
    let mid = sorted.len() / 2;
    if sorted.len() % 2 == 1 {
        sorted[mid]
    } else {
        0.5 * (sorted[mid - 1] + sorted[mid])
    }
}

fn std_deviation(values: &[f64]) -> f64 {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    (values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n).sqrt()
}

/// Per-episode regret against a frozen oracle estimate.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegretSeries {
    pub oracle: f64,
    pub achieved: Vec<f64>,
    /// r_n = oracle − return_n; negative values (beating the noisy oracle
    /// estimate) are preserved.
    pub instantaneous: Vec<f64>,
    /// Exact prefix sums of `instantaneous`.
    pub cumulative: Vec<f64>,
}

/// Builds the regret series for a sequence of achieved returns.
pub fn regret_from_returns(returns: &[f64], oracle: f64) -> RegretSeries {
    let instantaneous: Vec<f64> = returns.iter().map(|r| oracle - r).collect();
    let mut cumulative = Vec::with_capacity(instantaneous.len());
    let mut total = 0.0;
    for r in &instantaneous {
        total += r;
        cumulative.push(total);
    }
    RegretSeries {
        oracle,
        achieved: returns.to_vec(),
        instantaneous,
        cumulative,
    }
}

/// Regret series of a single experiment log.
pub fn cumulative_regret(log: &ExperimentLog, oracle: f64) -> RegretSeries {
    let returns: Vec<f64> = log.episodes.iter().map(|e| e.ret).collect();
    regret_from_returns(&returns, oracle)
}

/// Per-episode medians and spreads across seeds.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeedSummary {
    pub episodes: usize,
    pub median_return: Vec<f64>,
    pub std_return: Vec<f64>,
    pub median_info_gain: Vec<f64>,
    pub median_lambda: Vec<f64>,
    /// Some logs were shorter and were padded with their own last value.
    pub padded: bool,
}

/// Aggregates seed logs episode-wise: median and standard deviation of the
/// returns, plus median info gain and λ. Shorter logs are padded with their
/// final value and the summary is flagged.
pub fn summarize_seeds(logs: &[ExperimentLog]) -> Result<SeedSummary> {
    if logs.is_empty() {
        return Err(Error::Config("summarize_seeds needs at least one log".into()));
    }
    let episodes = logs.iter().map(|l| l.episodes.len()).max().unwrap_or(0);
    let padded = logs.iter().any(|l| l.episodes.len() != episodes);
    let mut summary = SeedSummary {
        episodes,
        median_return: Vec::with_capacity(episodes),
        std_return: Vec::with_capacity(episodes),
        median_info_gain: Vec::with_capacity(episodes),
        median_lambda: Vec::with_capacity(episodes),
        padded,
    };
    let pick = |log: &ExperimentLog, n: usize, f: &dyn Fn(&crate::runner::EpisodeRecord) -> f64| {
        let records = &log.episodes;
        if records.is_empty() {
            return f64::NAN;
        }
        f(&records[n.min(records.len() - 1)])
    };
    for n in 0..episodes {
        let returns: Vec<f64> = logs.iter().map(|l| pick(l, n, &|e| e.ret)).collect();
        let gains: Vec<f64> = logs.iter().map(|l| pick(l, n, &|e| e.info_gain)).collect();
        let lambdas: Vec<f64> = logs.iter().map(|l| pick(l, n, &|e| e.lambda)).collect();
        summary.median_return.push(median(&returns));
        summary.std_return.push(std_deviation(&returns));
        summary.median_info_gain.push(median(&gains));
        summary.median_lambda.push(median(&lambdas));
    }
    Ok(summary)
}

/// One exported episode row; mirrors the CSV columns.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SummaryRow {
    pub episode: usize,
    pub median_return: f64,
    pub std_return: f64,
    pub cum_regret: f64,
    pub info_gain: f64,
    pub lambda: f64,
}

/// Zips a summary with the regret computed from its median-return curve.
pub fn summary_rows(summary: &SeedSummary, series: &RegretSeries) -> Vec<SummaryRow> {
    (0..summary.episodes)
        .map(|n| SummaryRow {
            episode: n,
            median_return: summary.median_return[n],
            std_return: summary.std_return[n],
            cum_regret: series.cumulative.get(n).copied().unwrap_or(f64::NAN),
            info_gain: summary.median_info_gain[n],
            lambda: summary.median_lambda[n],
        })
        .collect()
}

/// Everything one experiment cell produced, in durable form. The oracle
/// value is an estimate (median return of planning on the true dynamics),
/// not the unknowable optimum, and is labeled as such.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResultsBundle {
    pub env: String,
    pub mode: String,
    pub regime: String,
    pub seeds: Vec<u64>,
    pub oracle_estimate: f64,
    pub rows: Vec<SummaryRow>,
    pub padded: bool,
    pub logs: Vec<ExperimentLog>,
}

impl ResultsBundle {
    pub fn new(
        env: impl Into<String>,
        mode: impl Into<String>,
        regime: impl Into<String>,
        oracle_estimate: f64,
        summary: &SeedSummary,
        series: &RegretSeries,
        logs: Vec<ExperimentLog>,
    ) -> Self {
        ResultsBundle {
            env: env.into(),
            mode: mode.into(),
            regime: regime.into(),
            seeds: logs.iter().map(|l| l.seed).collect(),
            oracle_estimate,
            rows: summary_rows(summary, series),
            padded: summary.padded,
            logs,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ExportFormat {
    Csv,
    Json,
}

fn io_err(path: &Path, source: io::Error) -> Error {
    Error::Io { path: path.to_path_buf(), source }
}

/// Writes the episode-level summary. CSV emits the fixed header plus one
/// row per episode; JSON wraps the same rows in a [`ResultsBundle`] without
/// logs attached.
pub fn export_results(
    summary: &SeedSummary,
    series: &RegretSeries,
    path: &Path,
    format: ExportFormat,
) -> Result<()> {
    match format {
        ExportFormat::Csv => write_summary_csv(path, summary, series),
        ExportFormat::Json => {
            let bundle =
                ResultsBundle::new("", "", "", series.oracle, summary, series, Vec::new());
            write_results_json(path, &bundle)
        }
    }
}

pub fn write_summary_csv(path: &Path, summary: &SeedSummary, series: &RegretSeries) -> Result<()> {
    let file = File::create(path).map_err(|e| io_err(path, e))?;
    let mut out = BufWriter::new(file);
    let write = |out: &mut BufWriter<File>, line: String| -> Result<()> {
        writeln!(out, "{line}").map_err(|e| io_err(path, e))
    };
    write(&mut out, CSV_HEADER.to_string())?;
    for row in summary_rows(summary, series) {
        write(
            &mut out,
            format!(
                "{},{:.16e},{:.16e},{:.16e},{:.16e},{:.16e}",
                row.episode,
                row.median_return,
                row.std_return,
                row.cum_regret,
                row.info_gain,
                row.lambda
            ),
        )?;
    }
    out.flush().map_err(|e| io_err(path, e))
}

pub fn read_summary_csv(path: &Path) -> Result<Vec<SummaryRow>> {
    let mut text = String::new();
    File::open(path)
        .and_then(|mut f| f.read_to_string(&mut text))
        .map_err(|e| io_err(path, e))?;
    let parse_err = |message: String| Error::Parse { path: path.to_path_buf(), message };
    let mut lines = text.lines();
    match lines.next() {
        Some(header) if header == CSV_HEADER => {}
        other => {
            return Err(parse_err(format!(
                "expected header '{CSV_HEADER}', found {:?}",
                other.unwrap_or("")
            )))
        }
    }
    let mut rows = Vec::new();
    for (i, line) in lines.enumerate() {
        if line.is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != 6 {
            return Err(parse_err(format!("row {}: expected 6 fields, got {}", i + 1, fields.len())));
        }
        let number = |s: &str| -> Result<f64> {
            s.parse::<f64>()
                .map_err(|e| parse_err(format!("row {}: bad float '{s}': {e}", i + 1)))
        };
        rows.push(SummaryRow {
            episode: fields[0]
                .parse::<usize>()
                .map_err(|e| parse_err(format!("row {}: bad episode '{}': {e}", i + 1, fields[0])))?,
            median_return: number(fields[1])?,
            std_return: number(fields[2])?,
            cum_regret: number(fields[3])?,
            info_gain: number(fields[4])?,
            lambda: number(fields[5])?,
        });
    }
    Ok(rows)
}

struct SciFormatter;

impl serde_json::ser::Formatter for SciFormatter {
    fn write_f64<W: ?Sized + io::Write>(&mut self, writer: &mut W, value: f64) -> io::Result<()> {
        if !value.is_finite() {
            return Err(io::Error::new(
                io::ErrorKind::InvalidData,
                "non-finite float cannot be serialized to JSON",
            ));
        }
        write!(writer, "{value:.16e}")
    }
}

pub fn write_results_json(path: &Path, bundle: &ResultsBundle) -> Result<()> {
    let file = File::create(path).map_err(|e| io_err(path, e))?;
    let mut out = BufWriter::new(file);
    let mut ser = serde_json::Serializer::with_formatter(&mut out, SciFormatter);
    bundle
        .serialize(&mut ser)
        .map_err(|e| Error::Parse { path: path.to_path_buf(), message: e.to_string() })?;
    out.write_all(b"\n").map_err(|e| io_err(path, e))?;
    out.flush().map_err(|e| io_err(path, e))
}

pub fn read_results_json(path: &Path) -> Result<ResultsBundle> {
    let file = File::open(path).map_err(|e| io_err(path, e))?;
    serde_json::from_reader(BufReader::new(file))
        .map_err(|e| Error::Parse { path: path.to_path_buf(), message: e.to_string() })
}

#[cfg(test)]
mod tests {
    use tempfile::tempdir;

    use super::*;
    use crate::runner::EpisodeRecord;

    fn log_with_returns(seed: u64, returns: &[f64]) -> ExperimentLog {
        ExperimentLog {
            env_name: "synthetic".into(),
            mode: "optimistic".into(),
            regime: "episodic".into(),
            seed,
            episodes: returns
                .iter()
                .enumerate()
                .map(|(n, &ret)| EpisodeRecord {
                    episode: n,
                    ret,
                    intrinsic_return: 0.5 * ret,
                    length: 10,
                    lambda: 10.0,
                    info_gain: n as f64 + ret.abs(),
                    wall_time: 0.0,
                })
                .collect(),
            steps: Vec::new(),
            aborted: None,
        }
    }

    #[test]
    fn median_handles_odd_even_and_singleton() {
        assert_eq!(median(&[3.0]), 3.0);
        assert_eq!(median(&[3.0, 1.0, 2.0]), 2.0);
        assert_eq!(median(&[4.0, 1.0, 2.0, 3.0]), 2.5);
    }

    #[test]
    fn constant_gap_regret_accumulates_linearly() {
        let log = log_with_returns(0, &[0.8; 10]);
        let series = cumulative_regret(&log, 1.0);
        assert!((series.cumulative[9] - 2.0).abs() < 1e-12);
        assert!(series.instantaneous.iter().all(|r| (r - 0.2).abs() < 1e-12));
    }

    #[test]
    fn zero_regret_when_returns_equal_the_oracle() {
        let log = log_with_returns(0, &[1.0; 5]);
        let series = cumulative_regret(&log, 1.0);
        assert!(series.cumulative.iter().all(|r| r.abs() < 1e-15));
    }

    #[test]
    fn final_regret_is_permutation_invariant() {
        let a = regret_from_returns(&[0.1, 0.7, 0.4, 0.9], 1.0);
        let b = regret_from_returns(&[0.9, 0.4, 0.7, 0.1], 1.0);
        assert!((a.cumulative.last().unwrap() - b.cumulative.last().unwrap()).abs() < 1e-15);
    }

    #[test]
    fn negative_regret_is_preserved() {
        let series = regret_from_returns(&[1.5], 1.0);
        assert_eq!(series.instantaneous[0], -0.5);
    }

    #[test]
    fn summarize_single_seed_is_the_seed_itself() {
        let log = log_with_returns(7, &[0.2, 0.4, 0.6]);
        let summary = summarize_seeds(std::slice::from_ref(&log)).unwrap();
        assert_eq!(summary.median_return, vec![0.2, 0.4, 0.6]);
        assert!(summary.std_return.iter().all(|s| *s == 0.0));
        assert!(!summary.padded);
    }

    #[test]
    fn summarize_matches_hand_statistics() {
        let logs = vec![
            log_with_returns(0, &[1.0]),
            log_with_returns(1, &[2.0]),
            log_with_returns(2, &[3.0]),
        ];
        let summary = summarize_seeds(&logs).unwrap();
        assert_eq!(summary.median_return[0], 2.0);
        let expected_std = (2.0_f64 / 3.0).sqrt();
        assert!((summary.std_return[0] - expected_std).abs() < 1e-12);
    }

    #[test]
    fn shorter_logs_are_padded_with_their_last_value() {
        let logs = vec![
            log_with_returns(0, &[1.0, 2.0, 3.0]),
            log_with_returns(1, &[5.0]),
        ];
        let summary = summarize_seeds(&logs).unwrap();
        assert!(summary.padded);
        assert_eq!(summary.median_return, vec![3.0, 3.5, 4.0]);
    }

    #[test]
    fn csv_round_trips_losslessly() {
        let dir = tempdir().unwrap();
        let path = dir.path().join("summary.csv");
        let logs = vec![
            log_with_returns(0, &[0.123456789012345, 0.9]),
            log_with_returns(1, &[0.3, 1.0 / 3.0]),
        ];
        let summary = summarize_seeds(&logs).unwrap();
        let series = regret_from_returns(&summary.median_return, 0.77);
        write_summary_csv(&path, &summary, &series).unwrap();

        let text = std::fs::read_to_string(&path).unwrap();
        assert!(text.starts_with(CSV_HEADER));
        assert!(text.ends_with('\n'));

        let rows = read_summary_csv(&path).unwrap();
        let original = summary_rows(&summary, &series);
        assert_eq!(rows.len(), original.len());
        for (a, b) in rows.iter().zip(original.iter()) {
            assert!((a.median_return - b.median_return).abs() < 1e-12);
            assert!((a.std_return - b.std_return).abs() < 1e-12);
            assert!((a.cum_regret - b.cum_regret).abs() < 1e-12);
            assert!((a.info_gain - b.info_gain).abs() < 1e-12);
            assert!((a.lambda - b.lambda).abs() < 1e-12);
        }
    }

    #[test]
    fn empty_series_writes_a_header_only_csv() {
        let dir = tempdir().unwrap();
        let path = dir.path().join("empty.csv");
        let summary = SeedSummary {
            episodes: 0,
            median_return: vec![],
            std_return: vec![],
            median_info_gain: vec![],
            median_lambda: vec![],
            padded: false,
        };
        let series = regret_from_returns(&[], 1.0);
        write_summary_csv(&path, &summary, &series).unwrap();
        let text = std::fs::read_to_string(&path).unwrap();
        assert_eq!(text, format!("{CSV_HEADER}\n"));
        assert!(read_summary_csv(&path).unwrap().is_empty());
    }

    #[test]
    fn json_bundle_round_trips_exactly() {
        let dir = tempdir().unwrap();
        let path = dir.path().join("results.json");
        let logs = vec![log_with_returns(3, &[0.1, 0.2]), log_with_returns(4, &[0.15, 0.22])];
        let summary = summarize_seeds(&logs).unwrap();
        let series = regret_from_returns(&summary.median_return, 0.5);
        let bundle = ResultsBundle::new(
            "pendulum",
            "optimistic",
            "episodic",
            0.5,
            &summary,
            &series,
            logs,
        );
        write_results_json(&path, &bundle).unwrap();
        let restored = read_results_json(&path).unwrap();
        assert_eq!(restored, bundle);
    }

    #[test]
    fn export_results_dispatches_both_formats() {
        let dir = tempdir().unwrap();
        let logs = vec![log_with_returns(0, &[0.4, 0.6])];
        let summary = summarize_seeds(&logs).unwrap();
        let series = regret_from_returns(&summary.median_return, 1.0);

        let csv = dir.path().join("out.csv");
        export_results(&summary, &series, &csv, ExportFormat::Csv).unwrap();
        assert_eq!(read_summary_csv(&csv).unwrap().len(), 2);

        let json = dir.path().join("out.json");
        export_results(&summary, &series, &json, ExportFormat::Json).unwrap();
        let bundle = read_results_json(&json).unwrap();
        assert_eq!(bundle.rows.len(), 2);
        assert!(bundle.logs.is_empty());
    }

    #[test]
    fn exports_are_byte_identical_across_repeats() {
        let dir = tempdir().unwrap();
        let logs = vec![log_with_returns(0, &[0.25, 0.5, 0.75])];
        let summary = summarize_seeds(&logs).unwrap();
        let series = regret_from_returns(&summary.median_return, 0.9);
        let a = dir.path().join("a.csv");
        let b = dir.path().join("b.csv");
        write_summary_csv(&a, &summary, &series).unwrap();
        write_summary_csv(&b, &summary, &series).unwrap();
        assert_eq!(std::fs::read(&a).unwrap(), std::fs::read(&b).unwrap());

        let ja = dir.path().join("a.json");
        let jb = dir.path().join("b.json");
        let bundle =
            ResultsBundle::new("synthetic", "mean", "episodic", 0.9, &summary, &series, logs);
        write_results_json(&ja, &bundle).unwrap();
        write_results_json(&jb, &bundle).unwrap();
        assert_eq!(std::fs::read(&ja).unwrap(), std::fs::read(&jb).unwrap());
    }
}
