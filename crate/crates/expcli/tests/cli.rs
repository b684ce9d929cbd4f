use std::path::{Path, PathBuf};
use std::process::Command;

use eppo_expcli::config::RunConfig;
use eppo_expcli::curves::{aggregate, export_curves};
use eppo_expcli::metrics::{read_metrics, MetricsLog};
use eppo_expcli::runner::run_grid;

fn scratch(name: &str) -> PathBuf {
    let dir = std::env::temp_dir().join(format!("eppo-cli-{name}-{}", std::process::id()));
    let _ = std::fs::remove_dir_all(&dir);
    std::fs::create_dir_all(&dir).unwrap();
    dir
}

fn grid_toml(out: &Path, total: usize) -> String {
    format!(
        r#"
name = "tiny"
output_dir = "{}"
seeds = [3, 4]
variants = ["PPO", {{ variant = "EPPO", k = 2, label = "EPPO_K2" }}]
eval_interval = 200
eval_episodes = 2
hidden = [8]
workers = 2

[env]
name = "dist-shift"

[hyperparams]
total_env_steps = {total}
rollout_length = 150
minibatch_size = 50
"#,
        out.display()
    )
}

fn without_timestamps(path: &Path) -> String {
    std::fs::read_to_string(path)
        .unwrap()
        .lines()
        .map(|l| l.rsplit_once(',').map_or(l, |(head, _)| head).to_string())
        .collect::<Vec<_>>()
        .join("\n")
}

#[test]
fn two_by_two_grid_logs_four_runs_and_reruns_identically() {
    let dir = scratch("grid");
    let cfg = RunConfig::parse(&grid_toml(&dir.join("a"), 500)).unwrap();
    let first = run_grid(&cfg, false).unwrap();
    let rows = read_metrics(&first.metrics_path).unwrap();
    let mut ids: Vec<&str> = rows.iter().map(|r| r.run_id.as_str()).collect();
    ids.dedup();
    assert_eq!(ids, ["PPO-s3", "PPO-s4", "EPPO_K2-s3", "EPPO_K2-s4"]);
    for id in &ids {
        let steps: Vec<usize> = rows.iter().filter(|r| r.run_id == *id).map(|r| r.env_steps).collect();
        assert!(steps.windows(2).all(|w| w[0] < w[1]), "{id}: {steps:?}");
    }
    assert!(dir.join("a/checkpoints/EPPO_K2-s4/final.ckpt").exists());
    assert_eq!(first.summary.len(), 2);

    let cfg_b = RunConfig::parse(&grid_toml(&dir.join("b"), 500)).unwrap();
    let second = run_grid(&cfg_b, false).unwrap();
    assert_eq!(
        without_timestamps(&first.metrics_path),
        without_timestamps(&second.metrics_path)
    );
    std::fs::remove_dir_all(dir).ok();
}

#[test]
fn zero_budget_records_only_initial_evaluations() {
    let dir = scratch("zero");
    let cfg = RunConfig::parse(&grid_toml(&dir.join("z"), 0)).unwrap();
    let out = run_grid(&cfg, false).unwrap();
    let rows = read_metrics(&out.metrics_path).unwrap();
    assert_eq!(rows.len(), 4);
    assert!(rows.iter().all(|r| r.env_steps == 0));
    std::fs::remove_dir_all(dir).ok();
}

#[test]
fn curve_std_matches_direct_computation_over_five_seeds() {
    let dir = scratch("curves");
    let toml = grid_toml(&dir.join("c"), 300)
        .replace("seeds = [3, 4]", "seeds = [0, 1, 2, 3, 4]")
        .replace(
            r#"variants = ["PPO", { variant = "EPPO", k = 2, label = "EPPO_K2" }]"#,
            r#"variants = ["PPO"]"#,
        );
    let cfg = RunConfig::parse(&toml).unwrap();
    let out = run_grid(&cfg, false).unwrap();
    let rows = read_metrics(&out.metrics_path).unwrap();
    let export = export_curves(&out.metrics_path, &dir.join("c/curves")).unwrap();
    let curve = &export.curves[0];
    for p in &curve.points {
        let vals: Vec<f64> = rows
            .iter()
            .filter(|r| r.env_steps == p.env_steps)
            .map(|r| r.eval_return)
            .collect();
        assert_eq!(vals.len(), 5);
        let m = vals.iter().sum::<f64>() / 5.0;
        let sd = (vals.iter().map(|v| (v - m) * (v - m)).sum::<f64>() / 5.0).sqrt();
        assert!((p.mean - m).abs() < 1e-12 && (p.std - sd).abs() < 1e-12);
    }
    assert_eq!(aggregate(&rows), export.curves);
    assert!(export.svg_path.unwrap().exists());
    std::fs::remove_dir_all(dir).ok();
}

#[test]
fn binary_exit_codes() {
    let bin = env!("CARGO_BIN_EXE_eppo");
    let dir = scratch("bin");
    let status = |args: &[&str]| Command::new(bin).args(args).output().unwrap().status.code();

    assert_eq!(status(&["verify-theorem1", "--trials", "300"]), Some(0));
    assert_eq!(status(&["no-such-command"]), Some(1));
    let bad = dir.join("bad.toml");
    std::fs::write(&bad, "name = [").unwrap();
    assert_eq!(status(&["run", bad.to_str().unwrap()]), Some(1));
    assert_eq!(
        status(&["report-ad", dir.join("missing.ckpt").to_str().unwrap()]),
        Some(2)
    );

    let empty = dir.join("empty.csv");
    MetricsLog::create(&empty).unwrap();
    let out = Command::new(bin)
        .args([
            "export-curves",
            empty.to_str().unwrap(),
            dir.join("curves").to_str().unwrap(),
        ])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(0));
    assert!(String::from_utf8_lossy(&out.stderr).contains("warning"));
    std::fs::remove_dir_all(dir).ok();
}
