//! Mean ± std learning curves from a metrics log, as CSV and SVG.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use crate::error::CliResult;
use crate::metrics::{read_metrics, MetricsRow};

#[derive(Debug, Clone, PartialEq)]
pub struct CurvePoint {
    pub env_steps: usize,
    pub mean: f64,
    /// Population standard deviation over runs.
    pub std: f64,
    pub runs: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Curve {
    pub label: String,
    pub points: Vec<CurvePoint>,
    /// Evaluation points dropped because some runs lack them, with the runs
    /// that lack each one.
    pub excluded: Vec<(usize, Vec<String>)>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CurveExport {
    pub curves: Vec<Curve>,
    pub csv_path: Option<PathBuf>,
    pub svg_path: Option<PathBuf>,
}

/// Groups rows by label, then by run, and averages `eval_return` at every
/// evaluation point shared by all runs of the label. Labels keep the order
/// in which they first appear.
pub fn aggregate(rows: &[MetricsRow]) -> Vec<Curve> {
    let mut labels: Vec<&str> = Vec::new();
    for r in rows {
        if !labels.contains(&r.label.as_str()) {
            labels.push(&r.label);
        }
    }
    labels
        .into_iter()
        .map(|label| {
            let mut runs: BTreeMap<&str, BTreeMap<usize, f64>> = BTreeMap::new();
            for r in rows.iter().filter(|r| r.label == label) {
                runs.entry(&r.run_id).or_default().insert(r.env_steps, r.eval_return);
            }
            let mut grid: Vec<usize> = runs.values().flat_map(|m| m.keys().copied()).collect();
            grid.sort_unstable();
            grid.dedup();
            let mut points = Vec::new();
            let mut excluded = Vec::new();
            for step in grid {
                let missing: Vec<String> = runs
                    .iter()
                    .filter(|(_, m)| !m.contains_key(&step))
                    .map(|(id, _)| id.to_string())
                    .collect();
                if !missing.is_empty() {
                    excluded.push((step, missing));
                    continue;
                }
                let vals: Vec<f64> = runs.values().map(|m| m[&step]).collect();
                let n = vals.len() as f64;
                let mean = vals.iter().sum::<f64>() / n;
                let var = vals.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
                points.push(CurvePoint {
                    env_steps: step,
                    mean,
                    std: var.sqrt(),
                    runs: vals.len(),
                });
            }
            Curve {
                label: label.to_string(),
                points,
                excluded,
            }
        })
        .collect()
}

pub fn curves_csv(curves: &[Curve]) -> String {
    let mut out = String::from("label,env_steps,mean_return,std_return,runs\n");
    for c in curves {
        for p in &c.points {
            writeln!(out, "{},{},{},{},{}", c.label, p.env_steps, p.mean, p.std, p.runs).unwrap();
        }
    }
    for c in curves {
        for (step, missing) in &c.excluded {
            writeln!(out, "# excluded,{},{},missing in {}", c.label, step, missing.join(" ")).unwrap();
        }
    }
    out
}

const PALETTE: [&str; 8] = [
    "#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b", "#e377c2", "#17becf",
];

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

/// Line chart with a ±1 std band per curve.
pub fn curves_svg(curves: &[Curve]) -> String {
    let (w, h) = (720.0, 420.0);
    let (left, right, top, bottom) = (60.0, 160.0, 20.0, 50.0);
    let pw = w - left - right;
    let ph = h - top - bottom;
    let pts = curves.iter().flat_map(|c| &c.points);
    let x_max = pts.clone().map(|p| p.env_steps).max().unwrap_or(1).max(1) as f64;
    let y_lo = pts.clone().map(|p| p.mean - p.std).fold(0.0, f64::min);
    let mut y_hi = pts.map(|p| p.mean + p.std).fold(1.0, f64::max);
    if y_hi <= y_lo {
        y_hi = y_lo + 1.0;
    }
    let sx = |x: f64| left + pw * x / x_max;
    let sy = |y: f64| top + ph * (1.0 - (y - y_lo) / (y_hi - y_lo));

    let mut out = String::new();
    writeln!(
        out,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{w}" height="{h}" viewBox="0 0 {w} {h}" font-family="sans-serif" font-size="12">"#
    )
    .unwrap();
    writeln!(out, r#"<rect width="{w}" height="{h}" fill="white"/>"#).unwrap();
    writeln!(
        out,
        r#"<path d="M{left} {top} V{} H{}" fill="none" stroke="black"/>"#,
        top + ph,
        left + pw
    )
    .unwrap();
    for i in 0..=4 {
        let fx = i as f64 / 4.0;
        let (x, y) = (left + pw * fx, top + ph * (1.0 - fx));
        writeln!(
            out,
            r#"<text x="{x:.1}" y="{:.1}" text-anchor="middle">{:.0}</text>"#,
            top + ph + 16.0,
            x_max * fx
        )
        .unwrap();
        writeln!(
            out,
            r#"<text x="{:.1}" y="{:.1}" text-anchor="end">{:.2}</text>"#,
            left - 6.0,
            y + 4.0,
            y_lo + (y_hi - y_lo) * fx
        )
        .unwrap();
    }
    writeln!(
        out,
        r#"<text x="{:.1}" y="{:.1}" text-anchor="middle">environment steps</text>"#,
        left + pw / 2.0,
        h - 10.0
    )
    .unwrap();
    writeln!(
        out,
        r#"<text x="14" y="{:.1}" text-anchor="middle" transform="rotate(-90 14 {:.1})">mean return</text>"#,
        top + ph / 2.0,
        top + ph / 2.0
    )
    .unwrap();

    for (i, c) in curves.iter().enumerate() {
        let color = PALETTE[i % PALETTE.len()];
        if !c.points.is_empty() {
            let upper = c.points.iter().map(|p| (p.env_steps as f64, p.mean + p.std));
            let lower = c.points.iter().rev().map(|p| (p.env_steps as f64, p.mean - p.std));
            let band: Vec<String> = upper
                .chain(lower)
                .map(|(x, y)| format!("{:.2},{:.2}", sx(x), sy(y)))
                .collect();
            writeln!(
                out,
                r#"<polygon points="{}" fill="{color}" fill-opacity="0.15" stroke="none"/>"#,
                band.join(" ")
            )
            .unwrap();
            let line: Vec<String> = c
                .points
                .iter()
                .map(|p| format!("{:.2},{:.2}", sx(p.env_steps as f64), sy(p.mean)))
                .collect();
            writeln!(
                out,
                r#"<polyline points="{}" fill="none" stroke="{color}" stroke-width="2"/>"#,
                line.join(" ")
            )
            .unwrap();
        }
        let ly = top + 10.0 + 18.0 * i as f64;
        let lx = left + pw + 12.0;
        writeln!(
            out,
            r#"<line x1="{lx}" y1="{ly}" x2="{}" y2="{ly}" stroke="{color}" stroke-width="2"/><text x="{}" y="{:.1}">{}</text>"#,
            lx + 18.0,
            lx + 24.0,
            ly + 4.0,
            escape(&c.label)
        )
        .unwrap();
    }
    out.push_str("</svg>\n");
    out
}

/// Reads `metrics` and writes `<out>.csv` and `<out>.svg`. An empty log
/// writes nothing and returns no curves.
pub fn export_curves(metrics: &Path, out: &Path) -> CliResult<CurveExport> {
    let rows = read_metrics(metrics)?;
    let curves = aggregate(&rows);
    if curves.is_empty() {
        return Ok(CurveExport {
            curves,
            csv_path: None,
            svg_path: None,
        });
    }
    if let Some(dir) = out.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir)?;
    }
    let csv_path = out.with_extension("csv");
    let svg_path = out.with_extension("svg");
    std::fs::write(&csv_path, curves_csv(&curves))?;
    std::fs::write(&svg_path, curves_svg(&curves))?;
    Ok(CurveExport {
        curves,
        csv_path: Some(csv_path),
        svg_path: Some(svg_path),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn row(label: &str, run: &str, steps: usize, ret: f64) -> MetricsRow {
        MetricsRow {
            run_id: run.into(),
            variant: label.into(),
            label: label.into(),
            seed: 0,
            env_steps: steps,
            eval_return: ret,
            entropy: 0.0,
            kl: 0.0,
            mu: 1.0,
            loss_total: 0.0,
            loss_ensemble: 0.0,
            loss_diversity: 0.0,
            loss_sub_mean: 0.0,
            action_disagreement: None,
            timestamp: 0,
        }
    }

    #[test]
    fn single_run_is_its_own_mean() {
        let rows = vec![row("A", "a0", 0, 0.1), row("A", "a0", 10, 0.4)];
        let c = aggregate(&rows);
        assert_eq!(c.len(), 1);
        assert_eq!(c[0].points.iter().map(|p| p.mean).collect::<Vec<_>>(), vec![0.1, 0.4]);
        assert!(c[0].points.iter().all(|p| p.std == 0.0));
    }

    #[test]
    fn missing_point_is_dropped_and_listed() {
        let rows = vec![
            row("A", "a0", 0, 0.0),
            row("A", "a0", 10, 1.0),
            row("A", "a1", 0, 0.5),
            row("B", "b0", 0, 0.2),
        ];
        let c = aggregate(&rows);
        assert_eq!(c[0].points.len(), 1);
        assert_eq!(c[0].points[0].mean, 0.25);
        assert_eq!(c[0].points[0].std, 0.25);
        assert_eq!(c[0].excluded, vec![(10, vec!["a1".to_string()])]);
        let csv = curves_csv(&c);
        assert!(csv.lines().any(|l| l == "# excluded,A,10,missing in a1"));
        assert!(curves_svg(&c).starts_with("<svg"));
    }
}
