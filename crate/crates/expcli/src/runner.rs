//! Executes a variant × seed grid on a bounded worker pool.

use std::fmt::Write as _;
use std::path::PathBuf;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::mpsc;
use std::time::Instant;

use eppo_core::trainer::{train, RunRecord};

use crate::config::{RunConfig, RunSpec};
use crate::error::{CliError, CliResult};
use crate::metrics::{unix_now, MetricsLog, MetricsRow};

#[derive(Debug, Clone, PartialEq)]
pub struct SummaryRow {
    pub label: String,
    pub runs: usize,
    pub final_mean: f64,
    /// Population standard deviation over seeds.
    pub final_std: f64,
    pub auc_mean: f64,
    pub ad_mean: Option<f64>,
}

#[derive(Debug)]
pub struct GridOutcome {
    pub runs: Vec<(RunSpec, RunRecord)>,
    pub metrics_path: PathBuf,
    pub summary: Vec<SummaryRow>,
}

fn mean_std(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n;
    (mean, var.sqrt())
}

pub fn summarize(runs: &[(RunSpec, RunRecord)]) -> Vec<SummaryRow> {
    let mut labels: Vec<&str> = Vec::new();
    for (spec, _) in runs {
        if !labels.contains(&spec.label.as_str()) {
            labels.push(&spec.label);
        }
    }
    labels
        .into_iter()
        .map(|label| {
            let recs: Vec<&RunRecord> = runs.iter().filter(|(s, _)| s.label == label).map(|(_, r)| r).collect();
            let finals: Vec<f64> = recs.iter().map(|r| r.final_return()).collect();
            let aucs: Vec<f64> = recs.iter().map(|r| r.normalized_auc()).collect();
            let ads: Vec<f64> = recs
                .iter()
                .filter_map(|r| r.rows.last().and_then(|row| row.action_disagreement))
                .collect();
            let (final_mean, final_std) = mean_std(&finals);
            SummaryRow {
                label: label.to_string(),
                runs: recs.len(),
                final_mean,
                final_std,
                auc_mean: mean_std(&aucs).0,
                ad_mean: (ads.len() == recs.len()).then(|| mean_std(&ads).0),
            }
        })
        .collect()
}

pub fn format_summary(rows: &[SummaryRow]) -> String {
    let mut out = String::new();
    let width = rows.iter().map(|r| r.label.len()).max().unwrap_or(5).max(7);
    writeln!(out, "{:<width$}  runs  final return      auc     AD", "variant").unwrap();
    for r in rows {
        let ad = r.ad_mean.map_or("-".to_string(), |v| format!("{v:.3}"));
        writeln!(
            out,
            "{:<width$}  {:>4}  {:.3} ± {:.3}  {:>7.3}  {ad:>5}",
            r.label, r.runs, r.final_mean, r.final_std, r.auc_mean
        )
        .unwrap();
    }
    out
}

fn summary_csv(rows: &[SummaryRow]) -> String {
    let mut out = String::from("label,runs,final_mean,final_std,auc_mean,ad_mean\n");
    for r in rows {
        let ad = r.ad_mean.map_or(String::new(), |v| v.to_string());
        writeln!(
            out,
            "{},{},{},{},{},{ad}",
            r.label, r.runs, r.final_mean, r.final_std, r.auc_mean
        )
        .unwrap();
    }
    out
}

/// Trains every grid cell, writes `metrics.csv`, `summary.csv`,
/// `summary.txt` and per-run checkpoints under the output directory.
///
/// Metrics are appended in grid order regardless of which worker finishes
/// first. If a run fails, the rows of all runs before it stay on disk and
/// the first failure is returned.
pub fn run_grid(cfg: &RunConfig, verbose: bool) -> CliResult<GridOutcome> {
    let grid = cfg.grid()?;
    std::fs::create_dir_all(&cfg.output_dir)?;
    std::fs::write(cfg.output_dir.join("config.toml"), cfg.to_toml())?;
    let metrics_path = cfg.output_dir.join("metrics.csv");
    let mut log = MetricsLog::create(&metrics_path)?;
    let workers = cfg.worker_count().min(grid.len()).max(1);
    let total = grid.len();

    let next = AtomicUsize::new(0);
    let (tx, rx) = mpsc::channel();
    let mut pending: Vec<Option<Result<RunRecord, eppo_core::Error>>> = (0..total).map(|_| None).collect();
    let mut done: Vec<(RunSpec, RunRecord)> = Vec::with_capacity(total);
    let mut failure: Option<CliError> = None;

    std::thread::scope(|scope| {
        for _ in 0..workers {
            let tx = tx.clone();
            let (next, grid) = (&next, &grid);
            scope.spawn(move || loop {
                let i = next.fetch_add(1, Ordering::SeqCst);
                if i >= grid.len() {
                    break;
                }
                let start = Instant::now();
                let result = train(&grid[i].algo);
                if tx.send((i, result, start.elapsed())).is_err() {
                    break;
                }
            });
        }
        drop(tx);
        let mut cursor = 0;
        let mut finished = 0;
        for (i, result, elapsed) in rx {
            finished += 1;
            if verbose {
                match &result {
                    Ok(r) => eprintln!(
                        "[{finished}/{total}] {} final return {:.3} ({:.1}s)",
                        grid[i].run_id,
                        r.final_return(),
                        elapsed.as_secs_f64()
                    ),
                    Err(e) => eprintln!("[{finished}/{total}] {} failed: {e}", grid[i].run_id),
                }
            }
            pending[i] = Some(result);
            while cursor < total && failure.is_none() {
                let Some(result) = pending[cursor].take() else { break };
                let spec = grid[cursor].clone();
                match result {
                    Ok(rec) => {
                        let ts = unix_now();
                        let rows: Vec<MetricsRow> = rec
                            .rows
                            .iter()
                            .map(|row| MetricsRow::from_eval(&spec.run_id, &spec.label, &rec, row, ts))
                            .collect();
                        if let Err(e) = log.append(&rows) {
                            failure = Some(e);
                        }
                        done.push((spec, rec));
                    }
                    Err(e) => {
                        failure = Some(CliError::Runtime(format!("run {} failed: {e}", spec.run_id)));
                    }
                }
                cursor += 1;
            }
            if failure.is_some() {
                // Stop handing out new runs; in-flight ones finish and are dropped.
                next.store(total, Ordering::SeqCst);
            }
        }
    });

    let summary = summarize(&done);
    if !summary.is_empty() {
        std::fs::write(cfg.output_dir.join("summary.csv"), summary_csv(&summary))?;
        std::fs::write(cfg.output_dir.join("summary.txt"), format_summary(&summary))?;
    }
    if let Some(e) = failure {
        return Err(e);
    }
    Ok(GridOutcome {
        runs: done,
        metrics_path,
        summary,
    })
}
