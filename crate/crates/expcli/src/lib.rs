//! Experiment runner for the ensemble policy learner: config grids, metric
//! logs, learning-curve export and diagnostic reports.

pub mod ad;
pub mod config;
pub mod curves;
pub mod error;
pub mod metrics;
pub mod runner;
pub mod theorem1;

pub use error::{CliError, CliResult};
