use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use eppo_core::envs::EnvName;
use eppo_expcli::config::{EnvConfig, RunConfig};
use eppo_expcli::{ad, curves, runner, theorem1, CliError, CliResult};

#[derive(Debug, Parser)]
#[command(name = "eppo", version, about = "Train and analyse ensemble policy learners")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Train every variant × seed cell of a TOML grid.
    Run {
        config: PathBuf,
        /// Suppress per-run progress lines.
        #[arg(long)]
        quiet: bool,
    },
    /// Check entropy(mean) >= mean(entropies) on random policy sets.
    VerifyTheorem1 {
        #[arg(long, default_value_t = 10_000)]
        trials: usize,
        #[arg(long, default_value_t = 8)]
        max_k: usize,
        #[arg(long, default_value_t = 16)]
        max_actions: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Action disagreement of a saved ensemble on states it visits.
    ReportAd {
        checkpoint: PathBuf,
        #[arg(long, default_value_t = 1000)]
        states: usize,
        #[arg(long, default_value = "dist-shift", value_parser = parse_env)]
        env: EnvName,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Mean ± std return curves per variant as CSV and SVG.
    ExportCurves { metrics: PathBuf, out: PathBuf },
}

fn parse_env(s: &str) -> Result<EnvName, String> {
    match s {
        "dist-shift" => Ok(EnvName::DistShift),
        "multi-room" => Ok(EnvName::MultiRoom),
        "empty-room" => Ok(EnvName::EmptyRoom),
        _ => Err(format!(
            "unknown environment {s:?}; expected dist-shift, multi-room or empty-room"
        )),
    }
}

fn execute(cmd: Command) -> CliResult<()> {
    match cmd {
        Command::Run { config, quiet } => {
            let cfg = RunConfig::load(&config)?.with_env_overrides();
            let outcome = runner::run_grid(&cfg, !quiet)?;
            print!("{}", runner::format_summary(&outcome.summary));
            println!("metrics: {}", outcome.metrics_path.display());
        }
        Command::VerifyTheorem1 {
            trials,
            max_k,
            max_actions,
            seed,
        } => {
            let report = theorem1::verify_theorem1(trials, max_k, max_actions, seed)?;
            print!("{}", report.render());
            if !report.holds() {
                return Err(CliError::Property(format!(
                    "{} of {trials} instances violate the entropy bound",
                    report.violations.len()
                )));
            }
        }
        Command::ReportAd {
            checkpoint,
            states,
            env,
            seed,
        } => {
            let spec = EnvConfig::preset(env).resolve();
            let value = ad::report_ad(&checkpoint, &spec, states, seed)?;
            println!("action disagreement: {value:.6} over {states} states");
        }
        Command::ExportCurves { metrics, out } => {
            let export = curves::export_curves(&metrics, &out)?;
            if export.curves.is_empty() {
                eprintln!("warning: {} has no rows; nothing written", metrics.display());
            }
            for path in [export.csv_path, export.svg_path].into_iter().flatten() {
                println!("wrote {}", path.display());
            }
            for c in &export.curves {
                for (step, missing) in &c.excluded {
                    eprintln!(
                        "note: {} at {step} steps excluded, missing in {}",
                        c.label,
                        missing.join(", ")
                    );
                }
            }
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match execute(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
