//! Append-only CSV log with one row per (run, evaluation point).

use std::fs::{File, OpenOptions};
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use eppo_core::trainer::{EvalRow, RunRecord};
use serde::{Deserialize, Serialize};

use crate::error::{CliError, CliResult};

/// First line of every log; bump when columns change.
pub const FORMAT_LINE: &str = "# eppo-metrics v1";

pub const COLUMNS: [&str; 15] = [
    "run_id",
    "variant",
    "label",
    "seed",
    "env_steps",
    "eval_return",
    "entropy",
    "kl",
    "mu",
    "loss_total",
    "loss_ensemble",
    "loss_diversity",
    "loss_sub_mean",
    "action_disagreement",
    "timestamp",
];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsRow {
    pub run_id: String,
    pub variant: String,
    pub label: String,
    pub seed: u64,
    pub env_steps: usize,
    pub eval_return: f64,
    pub entropy: f64,
    pub kl: f64,
    pub mu: f64,
    pub loss_total: f64,
    pub loss_ensemble: f64,
    pub loss_diversity: f64,
    pub loss_sub_mean: f64,
    pub action_disagreement: Option<f64>,
    /// Unix seconds when the row was written.
    pub timestamp: u64,
}

impl MetricsRow {
    pub fn from_eval(run_id: &str, label: &str, rec: &RunRecord, row: &EvalRow, timestamp: u64) -> Self {
        let subs = &row.losses.per_subpolicy_losses;
        let sub_mean = if subs.is_empty() {
            0.0
        } else {
            subs.iter().sum::<f64>() / subs.len() as f64
        };
        Self {
            run_id: run_id.to_string(),
            variant: rec.variant.name().to_string(),
            label: label.to_string(),
            seed: rec.seed,
            env_steps: row.env_steps,
            eval_return: row.mean_return,
            entropy: row.entropy,
            kl: row.mean_kl,
            mu: row.mu,
            loss_total: row.losses.total,
            loss_ensemble: row.losses.ensemble_loss,
            loss_diversity: row.losses.diversity_loss,
            loss_sub_mean: sub_mean,
            action_disagreement: row.action_disagreement,
            timestamp,
        }
    }
}

pub fn unix_now() -> u64 {
    SystemTime::now().duration_since(UNIX_EPOCH).map_or(0, |d| d.as_secs())
}

/// Single writer for a metrics file. Rows are flushed as each run is
/// appended so completed runs survive a later failure.
pub struct MetricsLog {
    path: PathBuf,
    file: File,
}

impl MetricsLog {
    /// Creates (truncating) the log and writes the format line and header.
    pub fn create(path: &Path) -> CliResult<Self> {
        if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
            std::fs::create_dir_all(dir)?;
        }
        let mut file = File::create(path)?;
        writeln!(file, "{FORMAT_LINE}")?;
        writeln!(file, "{}", COLUMNS.join(","))?;
        file.flush()?;
        Ok(Self {
            path: path.to_path_buf(),
            file,
        })
    }

    /// Opens an existing log for appending after checking its format line.
    pub fn append_to(path: &Path) -> CliResult<Self> {
        let first = BufReader::new(File::open(path)?).lines().next().transpose()?;
        if first.as_deref() != Some(FORMAT_LINE) {
            return Err(CliError::Runtime(format!("{}: not a v1 metrics log", path.display())));
        }
        let file = OpenOptions::new().append(true).open(path)?;
        Ok(Self {
            path: path.to_path_buf(),
            file,
        })
    }

    pub fn path(&self) -> &Path {
        &self.path
    }

    pub fn append(&mut self, rows: &[MetricsRow]) -> CliResult<()> {
        let mut w = csv::WriterBuilder::new().has_headers(false).from_writer(Vec::new());
        for r in rows {
            w.serialize(r)?;
        }
        let bytes = w.into_inner().map_err(|e| CliError::Runtime(e.to_string()))?;
        self.file.write_all(&bytes)?;
        self.file.flush()?;
        Ok(())
    }
}

pub fn read_metrics(path: &Path) -> CliResult<Vec<MetricsRow>> {
    let file = File::open(path).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
    let mut lines = BufReader::new(file);
    let mut first = String::new();
    lines.read_line(&mut first)?;
    if first.trim_end() != FORMAT_LINE {
        return Err(CliError::Config(format!("{}: not a v1 metrics log", path.display())));
    }
    let mut rdr = csv::ReaderBuilder::new().comment(Some(b'#')).from_reader(lines);
    let mut rows = Vec::new();
    for r in rdr.deserialize() {
        rows.push(r.map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?);
    }
    Ok(rows)
}
