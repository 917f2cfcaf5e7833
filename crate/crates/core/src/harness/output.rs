//! CSV, SVG and manifest emission. Every file is written to a temporary
//! sibling and renamed into place.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use plotters::prelude::*;
use serde::Serialize;

use super::config::{ExperimentConfig, ExperimentKind, SweepPoint};
use super::runner::{OneSparseRow, TrialRecord};
use super::seed::SEED_SCHEME;
use super::summary::{ratio_rows, RatioRow, SummaryRow};
use crate::analysis::{minmax_bounds, removal_curve, CoherenceTable, RemovalPoint};
use crate::transforms::HaarBasis;
use crate::{Error, Result};

pub const SUMMARY_HEADER: [&str; 9] = [
    "experiment",
    "strategy",
    "n",
    "m",
    "s",
    "sigma2",
    "median_sq_error",
    "trials",
    "master_seed",
];

/// 17 significant digits, enough to round-trip any `f64`.
pub fn fmt_f64(x: f64) -> String {
    format!("{x:.16e}")
}

/// Writes `bytes` to `path` via a temporary file and rename.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let dir = path.parent().filter(|p| !p.as_os_str().is_empty()).unwrap_or(Path::new("."));
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let name = path.file_name().and_then(|n| n.to_str()).unwrap_or("output");
    let tmp = dir.join(format!(".{name}.tmp-{}", std::process::id()));
    let result = (|| {
        let mut file = fs::File::create(&tmp)?;
        file.write_all(bytes)?;
        file.sync_all()?;
        fs::rename(&tmp, path)
    })();
    if let Err(e) = result {
        let _ = fs::remove_file(&tmp);
        return Err(Error::io(path, e));
    }
    Ok(())
}

fn csv_bytes<I>(header: &[&str], rows: I) -> Result<Vec<u8>>
where
    I: IntoIterator<Item = Vec<String>>,
{
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(header)?;
    for row in rows {
        w.write_record(&row)?;
    }
    w.into_inner().map_err(|e| Error::Plot(format!("csv buffer: {e}")))
}

pub fn summary_csv(rows: &[SummaryRow]) -> Result<Vec<u8>> {
    csv_bytes(
        &SUMMARY_HEADER,
        rows.iter().map(|r| {
            vec![
                r.experiment.clone(),
                r.strategy.clone(),
                r.n.to_string(),
                r.m.to_string(),
                r.s.to_string(),
                fmt_f64(r.sigma2),
                fmt_f64(r.median_sq_error),
                r.trials.to_string(),
                r.master_seed.to_string(),
            ]
        }),
    )
}

pub fn read_summary_csv(path: &Path) -> Result<Vec<SummaryRow>> {
    let mut reader = csv::Reader::from_path(path)?;
    let header: Vec<String> = reader.headers()?.iter().map(str::to_string).collect();
    if header != SUMMARY_HEADER {
        return Err(Error::Config(format!("{}: unexpected header {header:?}", path.display())));
    }
    reader
        .deserialize()
        .map(|row| row.map_err(Error::from))
        .collect()
}

pub fn trials_csv(records: &[TrialRecord]) -> Result<Vec<u8>> {
    csv_bytes(
        &[
            "strategy",
            "n",
            "m",
            "s",
            "trial",
            "seed",
            "signal_seed",
            "sq_error",
            "support_correct",
            "failed",
            "fallback",
        ],
        records.iter().map(|r| {
            vec![
                r.strategy.clone(),
                r.n.to_string(),
                r.m.to_string(),
                r.s.to_string(),
                r.trial.to_string(),
                r.seed.to_string(),
                r.signal_seed.to_string(),
                fmt_f64(r.sq_error),
                r.support_correct.to_string(),
                r.failed.to_string(),
                r.fallback.to_string(),
            ]
        }),
    )
}

pub fn ratio_csv(rows: &[RatioRow]) -> Result<Vec<u8>> {
    csv_bytes(
        &["n", "m", "s", "nonadaptive", "adaptive", "ratio", "log_n", "n_over_s"],
        rows.iter().map(|r| {
            vec![
                r.n.to_string(),
                r.m.to_string(),
                r.s.to_string(),
                r.nonadaptive.clone(),
                r.adaptive.clone(),
                fmt_f64(r.ratio),
                fmt_f64(r.log_n),
                fmt_f64(r.n_over_s),
            ]
        }),
    )
}

/// `n,excluded_blocks,value`; excluded blocks are `;`-separated, empty for none.
pub fn removal_csv(points: &[RemovalPoint]) -> Result<Vec<u8>> {
    csv_bytes(
        &["n", "excluded_blocks", "value"],
        points.iter().map(|p| {
            let blocks: Vec<String> = p.excluded.iter().map(u32::to_string).collect();
            vec![p.n.to_string(), blocks.join(";"), fmt_f64(p.value)]
        }),
    )
}

pub fn one_sparse_csv(rows: &[OneSparseRow]) -> Result<Vec<u8>> {
    csv_bytes(
        &[
            "n",
            "m",
            "support",
            "best_row",
            "closed_form_mse",
            "empirical_mse",
            "relative_error",
        ],
        rows.iter().map(|r| {
            vec![
                r.n.to_string(),
                r.m.to_string(),
                r.support.to_string(),
                r.best_row.to_string(),
                fmt_f64(r.closed_form_mse),
                fmt_f64(r.empirical_mse),
                fmt_f64(r.relative_error),
            ]
        }),
    )
}

/// A polyline of a plot.
#[derive(Debug, Clone)]
pub struct Series {
    pub label: String,
    pub points: Vec<(f64, f64)>,
    pub dashed: bool,
}

fn padded_log_range(values: impl Iterator<Item = f64>) -> Option<(f64, f64)> {
    let (lo, hi) = values
        .filter(|v| v.is_finite() && *v > 0.0)
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), v| (lo.min(v), hi.max(v)));
    if !lo.is_finite() {
        return None;
    }
    Some((10f64.powf(lo.log10().floor()), 10f64.powf(hi.log10().ceil().max(lo.log10().floor() + 1.0))))
}

macro_rules! draw_chart {
    ($root:expr, $title:expr, $x_desc:expr, $y_desc:expr, $series:expr, $x_range:expr, $y_range:expr) => {{
        let mut chart = ChartBuilder::on($root)
            .caption($title, ("sans-serif", 20))
            .margin(12)
            .x_label_area_size(40)
            .y_label_area_size(70)
            .build_cartesian_2d($x_range, $y_range)
            .map_err(plot_err)?;
        chart
            .configure_mesh()
            .x_desc($x_desc)
            .y_desc($y_desc)
            .draw()
            .map_err(plot_err)?;
        for (i, s) in $series.iter().enumerate() {
            let color = Palette99::pick(i).to_rgba();
            let style = ShapeStyle::from(&color).stroke_width(2);
            let pts: Vec<(f64, f64)> = s.points.iter().copied().filter(|&(_, y)| y > 0.0).collect();
            let anno = if s.dashed {
                chart
                    .draw_series(DashedLineSeries::new(pts, 6, 4, style))
                    .map_err(plot_err)?
            } else {
                chart.draw_series(LineSeries::new(pts, style)).map_err(plot_err)?
            };
            anno.label(s.label.clone())
                .legend(move |(x, y)| PathElement::new(vec![(x, y), (x + 20, y)], style));
        }
        chart
            .configure_series_labels()
            .background_style(WHITE.mix(0.85))
            .border_style(BLACK)
            .position(SeriesLabelPosition::UpperRight)
            .draw()
            .map_err(plot_err)?;
    }};
}

fn plot_err<E: std::fmt::Display>(e: E) -> Error {
    Error::Plot(e.to_string())
}

/// Renders `series` as an SVG line chart with a logarithmic y axis.
pub fn line_plot_svg(title: &str, x_desc: &str, y_desc: &str, series: &[Series], log_x: bool) -> Result<String> {
    let xs = || series.iter().flat_map(|s| s.points.iter().map(|p| p.0));
    let (y_lo, y_hi) = padded_log_range(series.iter().flat_map(|s| s.points.iter().map(|p| p.1)))
        .ok_or_else(|| Error::Plot("no positive values to plot".into()))?;
    let x_lo = xs().fold(f64::INFINITY, f64::min);
    let mut x_hi = xs().fold(f64::NEG_INFINITY, f64::max);
    if !(x_hi > x_lo) {
        x_hi = x_lo + 1.0;
    }
    let mut buf = String::new();
    {
        let root = SVGBackend::with_string(&mut buf, (800, 560)).into_drawing_area();
        root.fill(&WHITE).map_err(plot_err)?;
        if log_x {
            draw_chart!(&root, title, x_desc, y_desc, series, (x_lo..x_hi).log_scale(), (y_lo..y_hi).log_scale());
        } else {
            draw_chart!(&root, title, x_desc, y_desc, series, x_lo..x_hi, (y_lo..y_hi).log_scale());
        }
        root.present().map_err(plot_err)?;
    }
    Ok(buf)
}

fn strategy_series(summary: &[SummaryRow], by_x: impl Fn(&SummaryRow) -> f64, keep: impl Fn(&SummaryRow) -> bool) -> Vec<Series> {
    let mut labels: Vec<&str> = Vec::new();
    for r in summary.iter().filter(|r| keep(r)) {
        if !labels.contains(&r.strategy.as_str()) {
            labels.push(&r.strategy);
        }
    }
    labels
        .into_iter()
        .map(|label| Series {
            label: label.to_string(),
            points: summary
                .iter()
                .filter(|r| keep(r) && r.strategy == label)
                .map(|r| (by_x(r), r.median_sq_error))
                .collect(),
            dashed: label.starts_with("nonadaptive"),
        })
        .collect()
}

#[derive(Serialize)]
struct Manifest<'a> {
    tool: &'static str,
    version: &'static str,
    config: &'a ExperimentConfig,
    sweep_points: Vec<SweepPoint>,
    seed_scheme: &'static str,
    median_convention: &'static str,
    outputs: Vec<String>,
}

fn file_names(files: &[PathBuf]) -> Vec<String> {
    files
        .iter()
        .filter_map(|p| p.file_name().and_then(|n| n.to_str()).map(str::to_string))
        .collect()
}

/// Writes `manifest.json` listing `files` alongside the resolved config.
pub fn write_manifest(cfg: &ExperimentConfig, out_dir: &Path, files: &[PathBuf]) -> Result<PathBuf> {
    let sweep_points = if cfg.experiment == ExperimentKind::Coherence {
        Vec::new()
    } else {
        cfg.sweep_points()
    };
    let manifest = Manifest {
        tool: "adaptsense",
        version: env!("CARGO_PKG_VERSION"),
        config: cfg,
        sweep_points,
        seed_scheme: SEED_SCHEME,
        median_convention: "mean of the two middle order statistics for even counts",
        outputs: file_names(files),
    };
    let path = out_dir.join("manifest.json");
    let mut bytes = serde_json::to_vec_pretty(&manifest)?;
    bytes.push(b'\n');
    write_atomic(&path, &bytes)?;
    Ok(path)
}

/// Writes the summary, per-trial records, derived tables and plots of a
/// strategy experiment. Returns the written paths (manifest excluded).
pub fn emit_outputs(
    summary: &[SummaryRow],
    records: &[TrialRecord],
    cfg: &ExperimentConfig,
    out_dir: &Path,
) -> Result<Vec<PathBuf>> {
    if summary.is_empty() {
        return Err(Error::arg("summary is empty"));
    }
    let mut files = Vec::new();
    let mut put = |name: String, bytes: &[u8]| -> Result<()> {
        let path = out_dir.join(name);
        write_atomic(&path, bytes)?;
        files.push(path);
        Ok(())
    };
    put("summary.csv".into(), &summary_csv(summary)?)?;
    put("trials.csv".into(), &trials_csv(records)?)?;

    let ns = cfg.dimensions();
    match cfg.experiment {
        ExperimentKind::MseVsM => {
            for &n in &ns {
                let series = strategy_series(summary, |r| r.m as f64, |r| r.n == n);
                let name = if ns.len() == 1 {
                    "mse_vs_m.svg".to_string()
                } else {
                    format!("mse_vs_m_n{n}.svg")
                };
                let title = format!("median squared error, n = {n}, s = {}", cfg.s);
                put(name, line_plot_svg(&title, "m", "median squared error", &series, false)?.as_bytes())?;
            }
        }
        ExperimentKind::MseVsN => {
            let series = strategy_series(summary, |r| r.n as f64, |_| true);
            let title = format!("median squared error, s = {}", cfg.s);
            put(
                "mse_vs_n.svg".into(),
                line_plot_svg(&title, "n", "median squared error", &series, true)?.as_bytes(),
            )?;
        }
        ExperimentKind::RatioVsN => {
            let ratios = ratio_rows(summary, cfg);
            put("ratio.csv".into(), &ratio_csv(&ratios)?)?;
            let mut series: Vec<Series> = Vec::new();
            for r in &ratios {
                let label = format!("{} / {}", r.nonadaptive, r.adaptive);
                match series.iter_mut().find(|s| s.label == label) {
                    Some(s) => s.points.push((r.n as f64, r.ratio)),
                    None => series.push(Series {
                        label,
                        points: vec![(r.n as f64, r.ratio)],
                        dashed: false,
                    }),
                }
            }
            series.push(Series {
                label: "log n".into(),
                points: ns.iter().map(|&n| (n as f64, (n as f64).ln())).collect(),
                dashed: false,
            });
            series.push(Series {
                label: "n / s".into(),
                points: ns.iter().map(|&n| (n as f64, n as f64 / cfg.s as f64)).collect(),
                dashed: true,
            });
            let title = format!("nonadaptive / adaptive median error, s = {}", cfg.s);
            put("ratio_vs_n.svg".into(), line_plot_svg(&title, "n", "ratio", &series, true)?.as_bytes())?;
        }
        ExperimentKind::Coherence | ExperimentKind::OneSparseValidate => {
            return Err(Error::Config(format!(
                "{} has no strategy summary",
                cfg.experiment.label()
            )))
        }
    }
    Ok(files)
}

/// Block-removal curves, coherence bounds and best rows for each `n`; with
/// `full_table`, also every `|<f_j, H^T_Λ>|`.
pub fn emit_coherence(ns: &[usize], out_dir: &Path, full_table: bool) -> Result<Vec<PathBuf>> {
    let mut files = Vec::new();
    let mut put = |name: &str, bytes: &[u8]| -> Result<()> {
        let path = out_dir.join(name);
        write_atomic(&path, bytes)?;
        files.push(path);
        Ok(())
    };

    let mut curves = Vec::new();
    let mut bounds = Vec::new();
    let mut best = Vec::new();
    let mut table_rows = Vec::new();
    for &n in ns {
        curves.extend(removal_curve(n)?);
        let (lo, hi) = minmax_bounds(n)?;
        bounds.push(vec![n.to_string(), fmt_f64(lo), fmt_f64(hi), fmt_f64((2.0 / n as f64).sqrt())]);
        let table = CoherenceTable::closed_form(n)?;
        let haar = HaarBasis::new(n)?;
        for idx in 0..n {
            let (j, v) = table.best_row(idx);
            let block = if idx == 0 { 0 } else { haar.block_of_index(idx)? };
            best.push(vec![n.to_string(), idx.to_string(), block.to_string(), j.to_string(), fmt_f64(v)]);
        }
        if full_table {
            for j in 0..n {
                for idx in 0..n {
                    table_rows.push(vec![n.to_string(), j.to_string(), idx.to_string(), fmt_f64(table.get(j, idx))]);
                }
            }
        }
    }
    put("block_removal.csv", &removal_csv(&curves)?)?;
    put("bounds.csv", &csv_bytes(&["n", "min_max", "max_max", "sqrt_2_over_n"], bounds)?)?;
    put("best_rows.csv", &csv_bytes(&["n", "support", "block", "best_row", "coherence"], best)?)?;
    if full_table {
        put("coherence_table.csv", &csv_bytes(&["n", "j", "support", "value"], table_rows)?)?;
    }

    let removed_max = curves.iter().map(|p| p.excluded.len()).max().unwrap_or(0);
    let mut series: Vec<Series> = (0..=removed_max)
        .map(|k| Series {
            label: if k == 0 {
                "all supports".to_string()
            } else {
                format!("top {k} block(s) excluded")
            },
            points: curves
                .iter()
                .filter(|p| p.excluded.len() == k)
                .map(|p| (p.n as f64, p.value))
                .collect(),
            dashed: k > 0,
        })
        .filter(|s| !s.points.is_empty())
        .collect();
    series.push(Series {
        label: "sqrt(2/n)".into(),
        points: ns.iter().map(|&n| (n as f64, (2.0 / n as f64).sqrt())).collect(),
        dashed: false,
    });
    if ns.len() > 1 {
        let svg = line_plot_svg("max coherence over remaining supports", "n", "max |<f_j, h_k>|", &series, true)?;
        put("block_removal.svg", svg.as_bytes())?;
    }
    Ok(files)
}

pub fn emit_one_sparse(rows: &[OneSparseRow], out_dir: &Path) -> Result<Vec<PathBuf>> {
    let path = out_dir.join("one_sparse.csv");
    write_atomic(&path, &one_sparse_csv(rows)?)?;
    Ok(vec![path])
}
