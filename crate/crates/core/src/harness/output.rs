//! CSV, JSON and SVG artifacts.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use plotters::prelude::*;
use serde::{Deserialize, Serialize};
use serde_json::json;

use super::{Comparison, ExperimentResult, SweepResult};
use crate::error::{Error, Result};

/// Artifact kinds.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OutputFormat {
    Csv,
    Json,
    Plot,
}

impl OutputFormat {
    pub const ALL: [OutputFormat; 3] = [OutputFormat::Csv, OutputFormat::Json, OutputFormat::Plot];

    pub fn from_name(name: &str) -> Result<Self> {
        match name {
            "csv" => Ok(OutputFormat::Csv),
            "json" => Ok(OutputFormat::Json),
            "plot" | "svg" => Ok(OutputFormat::Plot),
            other => Err(Error::config(format!("unknown output format `{other}`"))),
        }
    }
}

fn write(path: PathBuf, body: &str, written: &mut Vec<PathBuf>) -> Result<()> {
    fs::write(&path, body).map_err(|e| Error::io(&path, e))?;
    written.push(path);
    Ok(())
}

fn ensure_dir(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))
}

fn stem(r: &ExperimentResult) -> String {
    format!("{}-{}", r.spec.name, r.spec.strategy)
}

/// Curves of one experiment as CSV text.
pub fn summary_csv(r: &ExperimentResult) -> String {
    let s = &r.summary;
    let with_std = s.replications > 1;
    let mut out = String::from("round,chosen_count,chosen_ratio,cumulative_cost");
    if with_std {
        out.push_str(",chosen_count_std,chosen_ratio_std,cumulative_cost_std");
    }
    out.push('\n');
    for i in 0..s.rounds.len() {
        let _ = write!(
            out,
            "{},{},{},{}",
            s.rounds[i], s.chosen_count_mean[i], s.chosen_ratio_mean[i], s.cost_mean[i]
        );
        if with_std {
            let _ = write!(
                out,
                ",{},{},{}",
                s.chosen_count_std[i], s.chosen_ratio_std[i], s.cost_std[i]
            );
        }
        out.push('\n');
    }
    out
}

/// Summary of one experiment as a JSON value.
pub fn summary_json(r: &ExperimentResult) -> serde_json::Value {
    let s = &r.summary;
    let runs: Vec<_> = r
        .runs
        .iter()
        .map(|m| {
            json!({
                "final_chosen_count": m.final_chosen(),
                "final_chosen_ratio": m.final_ratio(),
                "final_cost": m.final_cost,
                "target_shortfall": m.target_shortfall,
                "bound_checks": m.bounds,
            })
        })
        .collect();
    json!({
        "spec": r.spec,
        "strategy": r.spec.strategy,
        "replications": s.replications,
        "horizon": r.spec.horizon,
        "final_chosen_ratio_mean": s.final_ratio_mean,
        "final_chosen_ratio_std": s.final_ratio_std,
        "final_cost_mean": s.final_cost_mean,
        "final_cost_std": s.final_cost_std,
        "cost_per_round": s.final_cost_mean / r.spec.horizon as f64,
        "target_shortfall_mean": s.target_shortfall_mean,
        "per_arm_pulls_mean": s.per_arm_pulls_mean,
        "bound_checks": s.bounds,
        "runs": runs,
    })
}

fn pretty(v: &serde_json::Value) -> String {
    let mut s = serde_json::to_string_pretty(v).expect("json values serialize");
    s.push('\n');
    s
}

/// Writes the artifacts of one experiment. Returns the files written.
pub fn emit_outputs(
    r: &ExperimentResult,
    out_dir: &Path,
    formats: &[OutputFormat],
) -> Result<Vec<PathBuf>> {
    ensure_dir(out_dir)?;
    let mut written = Vec::new();
    if formats.contains(&OutputFormat::Csv) {
        write(
            out_dir.join(format!("{}.csv", stem(r))),
            &summary_csv(r),
            &mut written,
        )?;
    }
    if formats.contains(&OutputFormat::Json) {
        write(
            out_dir.join(format!("{}.json", stem(r))),
            &pretty(&summary_json(r)),
            &mut written,
        )?;
    }
    if formats.contains(&OutputFormat::Plot) {
        written.extend(curve_plots(&[r], out_dir, &stem(r))?);
    }
    Ok(written)
}

/// Writes per-strategy artifacts plus a combined CSV, combined plots and
/// relative final costs against the first strategy.
pub fn emit_comparison(
    c: &Comparison,
    out_dir: &Path,
    formats: &[OutputFormat],
) -> Result<Vec<PathBuf>> {
    ensure_dir(out_dir)?;
    let mut written = Vec::new();
    let per_file: Vec<OutputFormat> = formats
        .iter()
        .copied()
        .filter(|f| *f != OutputFormat::Plot)
        .collect();
    for r in &c.results {
        written.extend(emit_outputs(r, out_dir, &per_file)?);
    }
    let Some(first) = c.results.first() else {
        return Ok(written);
    };
    let name = &first.spec.name;
    if formats.contains(&OutputFormat::Csv) {
        let mut out = String::from("round");
        for r in &c.results {
            let s = r.spec.strategy;
            let _ = write!(out, ",{s}_chosen_ratio,{s}_cumulative_cost");
        }
        out.push('\n');
        for (i, t) in first.summary.rounds.iter().enumerate() {
            let _ = write!(out, "{t}");
            for r in &c.results {
                let _ = write!(
                    out,
                    ",{},{}",
                    r.summary.chosen_ratio_mean[i], r.summary.cost_mean[i]
                );
            }
            out.push('\n');
        }
        write(
            out_dir.join(format!("{name}-comparison.csv")),
            &out,
            &mut written,
        )?;
    }
    if formats.contains(&OutputFormat::Json) {
        let base = first.spec.strategy;
        let rows: Vec<_> = c
            .results
            .iter()
            .map(|r| {
                json!({
                    "strategy": r.spec.strategy,
                    "final_cost_mean": r.summary.final_cost_mean,
                    "final_chosen_ratio_mean": r.summary.final_ratio_mean,
                    "relative_cost": c.relative_cost(base, r.spec.strategy),
                })
            })
            .collect();
        let v = json!({ "name": name, "baseline": base, "horizon": first.spec.horizon, "strategies": rows });
        write(
            out_dir.join(format!("{name}-comparison.json")),
            &pretty(&v),
            &mut written,
        )?;
    }
    if formats.contains(&OutputFormat::Plot) {
        let refs: Vec<&ExperimentResult> = c.results.iter().collect();
        written.extend(curve_plots(&refs, out_dir, name)?);
    }
    Ok(written)
}

/// Writes the grid table and a final-cost-versus-parameter plot.
pub fn emit_sweep(
    s: &SweepResult,
    out_dir: &Path,
    formats: &[OutputFormat],
) -> Result<Vec<PathBuf>> {
    ensure_dir(out_dir)?;
    let mut written = Vec::new();
    let Some(first) = s.points.first().and_then(|p| p.first()) else {
        return Ok(written);
    };
    let name = format!("{}-sweep-{}", first.result.spec.name, s.param.name());
    if formats.contains(&OutputFormat::Csv) {
        let mut out = String::from(
            "strategy,param_value,final_cost_mean,final_cost_std,final_ratio_mean,final_ratio_std,target_shortfall_mean\n",
        );
        for (strategy, row) in s.strategies.iter().zip(&s.points) {
            for p in row {
                let m = &p.result.summary;
                let _ = writeln!(
                    out,
                    "{strategy},{},{},{},{},{},{}",
                    p.value,
                    m.final_cost_mean,
                    m.final_cost_std,
                    m.final_ratio_mean,
                    m.final_ratio_std,
                    m.target_shortfall_mean
                );
            }
        }
        write(out_dir.join(format!("{name}.csv")), &out, &mut written)?;
    }
    if formats.contains(&OutputFormat::Json) {
        let rows: Vec<_> = s
            .strategies
            .iter()
            .zip(&s.points)
            .map(|(strategy, row)| {
                let pts: Vec<_> = row
                    .iter()
                    .map(|p| {
                        json!({
                            "param_value": p.value,
                            "final_cost_mean": p.result.summary.final_cost_mean,
                            "final_cost_std": p.result.summary.final_cost_std,
                            "final_chosen_ratio_mean": p.result.summary.final_ratio_mean,
                            "target_shortfall_mean": p.result.summary.target_shortfall_mean,
                        })
                    })
                    .collect();
                json!({ "strategy": strategy, "points": pts })
            })
            .collect();
        let v = json!({ "spec": first.result.spec, "param": s.param, "series": rows });
        write(
            out_dir.join(format!("{name}.json")),
            &pretty(&v),
            &mut written,
        )?;
    }
    if formats.contains(&OutputFormat::Plot) {
        let series: Vec<(String, Vec<(f64, f64)>)> = s
            .strategies
            .iter()
            .zip(&s.points)
            .map(|(st, row)| {
                (
                    st.to_string(),
                    row.iter()
                        .map(|p| (p.value, p.result.summary.final_cost_mean))
                        .collect(),
                )
            })
            .collect();
        let path = out_dir.join(format!("{name}.svg"));
        line_chart(
            &path,
            &format!("final cost vs {}", s.param.name()),
            s.param.name(),
            "cost",
            &series,
            true,
        )?;
        written.push(path);
    }
    Ok(written)
}

fn curve_plots(results: &[&ExperimentResult], out_dir: &Path, stem: &str) -> Result<Vec<PathBuf>> {
    let ratio: Vec<(String, Vec<(f64, f64)>)> = results
        .iter()
        .map(|r| {
            let s = &r.summary;
            let pts = s
                .rounds
                .iter()
                .zip(&s.chosen_ratio_mean)
                .map(|(&t, &y)| (t as f64, y))
                .collect();
            (r.spec.strategy.to_string(), pts)
        })
        .collect();
    let cost: Vec<(String, Vec<(f64, f64)>)> = results
        .iter()
        .map(|r| {
            let s = &r.summary;
            let pts = s
                .rounds
                .iter()
                .zip(&s.cost_mean)
                .map(|(&t, &y)| (t as f64, y))
                .collect();
            (r.spec.strategy.to_string(), pts)
        })
        .collect();
    let ratio_path = out_dir.join(format!("{stem}-ratio.svg"));
    let cost_path = out_dir.join(format!("{stem}-cost.svg"));
    line_chart(&ratio_path, "chosen ratio", "round", "ratio", &ratio, false)?;
    line_chart(&cost_path, "cumulative cost", "round", "cost", &cost, false)?;
    Ok(vec![ratio_path, cost_path])
}

fn line_chart(
    path: &Path,
    title: &str,
    x_label: &str,
    y_label: &str,
    series: &[(String, Vec<(f64, f64)>)],
    markers: bool,
) -> Result<()> {
    let plot_err = |e: String| Error::io(path, std::io::Error::other(e));
    let xs = series.iter().flat_map(|(_, p)| p.iter().map(|q| q.0));
    let ys = series.iter().flat_map(|(_, p)| p.iter().map(|q| q.1));
    let (x0, x1) = xs.fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), x| {
        (a.min(x), b.max(x))
    });
    let y1 = ys.fold(0.0f64, f64::max);
    let (x0, x1) = if x0 < x1 {
        (x0, x1)
    } else {
        (x0 - 0.5, x0 + 0.5)
    };
    let y1 = if y1 > 0.0 { y1 * 1.05 } else { 1.0 };

    let root = SVGBackend::new(path, (800, 500)).into_drawing_area();
    root.fill(&WHITE).map_err(|e| plot_err(e.to_string()))?;
    let mut chart = ChartBuilder::on(&root)
        .caption(title, ("sans-serif", 22))
        .margin(12)
        .x_label_area_size(40)
        .y_label_area_size(60)
        .build_cartesian_2d(x0..x1, 0.0..y1)
        .map_err(|e| plot_err(e.to_string()))?;
    chart
        .configure_mesh()
        .x_desc(x_label)
        .y_desc(y_label)
        .draw()
        .map_err(|e| plot_err(e.to_string()))?;
    for (i, (label, pts)) in series.iter().enumerate() {
        let color = Palette99::pick(i).to_rgba();
        chart
            .draw_series(LineSeries::new(pts.iter().copied(), color.stroke_width(2)))
            .map_err(|e| plot_err(e.to_string()))?
            .label(label.as_str())
            .legend(move |(x, y)| PathElement::new([(x, y), (x + 20, y)], color.stroke_width(2)));
        if markers {
            chart
                .draw_series(pts.iter().map(|&p| Circle::new(p, 3, color.filled())))
                .map_err(|e| plot_err(e.to_string()))?;
        }
    }
    chart
        .configure_series_labels()
        .background_style(WHITE.mix(0.8))
        .border_style(BLACK)
        .draw()
        .map_err(|e| plot_err(e.to_string()))?;
    root.present().map_err(|e| plot_err(e.to_string()))?;
    Ok(())
}
