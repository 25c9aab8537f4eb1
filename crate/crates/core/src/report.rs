//! Result tables and static plots for a finished comparison run.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::search::ComparisonRun;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExportFormat {
    Json,
    Csv,
}

impl FromStr for ExportFormat {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "json" => Ok(Self::Json),
            "csv" => Ok(Self::Csv),
            _ => Err(Error::InvalidParameter(format!(
                "unknown export format `{s}`; valid options: json, csv"
            ))),
        }
    }
}

pub const CSV_HEADER: [&str; 8] = [
    "iteration",
    "m1_best_score",
    "m2_best_score",
    "best_agreeability",
    "mean_agreeability",
    "std_agreeability",
    "m1_dropped",
    "m2_dropped",
];

fn cell(v: Option<f64>) -> String {
    v.map(|v| v.to_string()).unwrap_or_default()
}

fn csv_string(header: &[&str], rows: impl IntoIterator<Item = Vec<String>>) -> String {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(header).expect("in-memory write");
    for row in rows {
        w.write_record(&row).expect("in-memory write");
    }
    String::from_utf8(w.into_inner().expect("in-memory flush")).expect("utf-8 input")
}

/// Serialises a run. JSON carries every candidate with its feature list and
/// predictions; CSV has one summary row per iteration.
pub fn export_results(run: &ComparisonRun, format: ExportFormat) -> String {
    match format {
        ExportFormat::Json => serde_json::to_string_pretty(run).expect("plain data serialises"),
        ExportFormat::Csv => csv_string(
            &CSV_HEADER,
            run.iterations.iter().map(|it| {
                vec![
                    it.index.to_string(),
                    it.m1.best_score.to_string(),
                    it.m2.best_score.to_string(),
                    it.best_agreeability.to_string(),
                    cell(it.mean_agreeability),
                    cell(it.std_agreeability),
                    it.m1.dropped_group.clone().unwrap_or_default(),
                    it.m2.dropped_group.clone().unwrap_or_default(),
                ]
            }),
        ),
    }
}

pub fn load_results(path: impl AsRef<Path>) -> Result<ComparisonRun> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    Ok(serde_json::from_str(&text)?)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PlotKind {
    /// Best and mean agreeability per iteration with a one-std band.
    AgreeabilityCurves,
    /// Agreeability on the left axis, both models' scores on the right.
    DualAxis,
}

impl PlotKind {
    pub fn name(self) -> &'static str {
        match self {
            PlotKind::AgreeabilityCurves => "agreeability_curves",
            PlotKind::DualAxis => "dual_axis",
        }
    }
}

impl FromStr for PlotKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "agreeability_curves" => Ok(Self::AgreeabilityCurves),
            "dual_axis" => Ok(Self::DualAxis),
            _ => Err(Error::InvalidParameter(format!(
                "unknown plot kind `{s}`; valid options: agreeability_curves, dual_axis"
            ))),
        }
    }
}

/// Numbers behind a plot, one row per iteration. Missing values stay `None`.
#[derive(Debug, Clone, PartialEq)]
pub struct PlotData {
    pub kind: PlotKind,
    pub header: Vec<String>,
    pub rows: Vec<Vec<Option<f64>>>,
}

impl PlotData {
    pub fn to_csv(&self) -> String {
        let header: Vec<&str> = self.header.iter().map(String::as_str).collect();
        csv_string(&header, self.rows.iter().map(|r| r.iter().map(|v| cell(*v)).collect()))
    }

    fn column(&self, name: &str) -> Vec<Option<f64>> {
        let i = self.header.iter().position(|h| h == name).expect("known column");
        self.rows.iter().map(|r| r[i]).collect()
    }
}

pub fn plot_data(run: &ComparisonRun, kind: PlotKind) -> Result<PlotData> {
    if run.iterations.len() < 2 {
        return Err(Error::Report(format!(
            "plots need at least 2 iterations, the run has {}",
            run.iterations.len()
        )));
    }
    let criterion = run.config.options.criterion.name();
    let (header, rows): (Vec<String>, Vec<Vec<Option<f64>>>) = match kind {
        PlotKind::AgreeabilityCurves => (
            ["iteration", "best_agreeability", "mean_agreeability", "band_min", "band_max"]
                .map(String::from)
                .to_vec(),
            run.iterations
                .iter()
                .map(|it| {
                    let band = it.mean_agreeability.zip(it.std_agreeability);
                    vec![
                        Some(it.index as f64),
                        Some(it.best_agreeability),
                        it.mean_agreeability,
                        band.map(|(m, s)| m - s),
                        band.map(|(m, s)| m + s),
                    ]
                })
                .collect(),
        ),
        PlotKind::DualAxis => (
            vec![
                "iteration".into(),
                "best_agreeability".into(),
                format!("m1_{criterion}"),
                format!("m2_{criterion}"),
            ],
            run.iterations
                .iter()
                .map(|it| {
                    vec![
                        Some(it.index as f64),
                        Some(it.best_agreeability),
                        Some(it.m1.best_score),
                        Some(it.m2.best_score),
                    ]
                })
                .collect(),
        ),
    };
    Ok(PlotData { kind, header, rows })
}

const WIDTH: f64 = 800.0;
const HEIGHT: f64 = 450.0;
const LEFT: f64 = 70.0;
const RIGHT: f64 = 70.0;
const TOP: f64 = 40.0;
const BOTTOM: f64 = 50.0;

struct Axis {
    lo: f64,
    hi: f64,
}

impl Axis {
    fn fit(values: impl Iterator<Item = f64>) -> Self {
        let (mut lo, mut hi) = values.fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), v| (a.min(v), b.max(v)));
        if !lo.is_finite() {
            (lo, hi) = (0.0, 1.0);
        }
        let pad = if hi > lo { 0.05 * (hi - lo) } else { 0.05 };
        Self { lo: lo - pad, hi: hi + pad }
    }

    fn y(&self, v: f64) -> f64 {
        TOP + (self.hi - v) / (self.hi - self.lo) * (HEIGHT - TOP - BOTTOM)
    }
}

fn x_pos(i: usize, n: usize) -> f64 {
    LEFT + i as f64 / (n - 1) as f64 * (WIDTH - LEFT - RIGHT)
}

fn polyline(svg: &mut String, pts: &[(f64, f64)], colour: &str, dash: bool) {
    let coords: Vec<String> = pts.iter().map(|(x, y)| format!("{x:.1},{y:.1}")).collect();
    let dash = if dash { " stroke-dasharray=\"6 4\"" } else { "" };
    let _ = writeln!(
        svg,
        "<polyline fill=\"none\" stroke=\"{colour}\" stroke-width=\"2\"{dash} points=\"{}\"/>",
        coords.join(" ")
    );
}

fn y_ticks(svg: &mut String, axis: &Axis, x: f64, anchor: &str, offset: f64) {
    for t in 0..=4 {
        let v = axis.lo + (axis.hi - axis.lo) * t as f64 / 4.0;
        let _ = writeln!(
            svg,
            "<text x=\"{:.1}\" y=\"{:.1}\" font-size=\"11\" text-anchor=\"{anchor}\">{v:.3}</text>",
            x + offset,
            axis.y(v) + 4.0
        );
    }
}

/// Renders a plot as a standalone SVG document.
pub fn render_svg(data: &PlotData, criterion: &str) -> String {
    let n = data.rows.len();
    let iters = data.column("iteration");
    let xs: Vec<f64> = (0..n).map(|i| x_pos(i, n)).collect();
    let mut svg = String::new();
    let _ = writeln!(
        svg,
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{WIDTH}\" height=\"{HEIGHT}\" viewBox=\"0 0 {WIDTH} {HEIGHT}\">"
    );
    let _ = writeln!(svg, "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>");
    let bottom = HEIGHT - BOTTOM;
    let _ = writeln!(
        svg,
        "<g stroke=\"black\"><line x1=\"{LEFT}\" y1=\"{bottom}\" x2=\"{}\" y2=\"{bottom}\"/><line x1=\"{LEFT}\" y1=\"{TOP}\" x2=\"{LEFT}\" y2=\"{bottom}\"/></g>",
        WIDTH - RIGHT
    );
    for (x, it) in xs.iter().zip(&iters) {
        let _ = writeln!(
            svg,
            "<g class=\"x-tick\"><line x1=\"{x:.1}\" y1=\"{bottom}\" x2=\"{x:.1}\" y2=\"{:.1}\" stroke=\"black\"/><text x=\"{x:.1}\" y=\"{:.1}\" font-size=\"11\" text-anchor=\"middle\">{}</text></g>",
            bottom + 5.0,
            bottom + 18.0,
            it.unwrap_or_default()
        );
    }
    let _ = writeln!(
        svg,
        "<text x=\"{:.1}\" y=\"{:.1}\" font-size=\"13\" text-anchor=\"middle\">iteration</text>",
        WIDTH / 2.0,
        HEIGHT - 10.0
    );
    let best = data.column("best_agreeability");
    match data.kind {
        PlotKind::AgreeabilityCurves => {
            let mean = data.column("mean_agreeability");
            let lo = data.column("band_min");
            let hi = data.column("band_max");
            let axis = Axis::fit(best.iter().chain(&lo).chain(&hi).flatten().copied());
            let upper: Vec<(f64, f64)> = xs.iter().zip(&hi).filter_map(|(x, v)| v.map(|v| (*x, axis.y(v)))).collect();
            let lower: Vec<(f64, f64)> = xs.iter().zip(&lo).filter_map(|(x, v)| v.map(|v| (*x, axis.y(v)))).collect();
            if !upper.is_empty() {
                let pts: Vec<String> = upper
                    .iter()
                    .chain(lower.iter().rev())
                    .map(|(x, y)| format!("{x:.1},{y:.1}"))
                    .collect();
                let _ = writeln!(
                    svg,
                    "<polygon class=\"std-band\" fill=\"steelblue\" fill-opacity=\"0.2\" stroke=\"none\" points=\"{}\"/>",
                    pts.join(" ")
                );
            }
            let best_pts: Vec<(f64, f64)> = xs.iter().zip(&best).filter_map(|(x, v)| v.map(|v| (*x, axis.y(v)))).collect();
            let mean_pts: Vec<(f64, f64)> = xs.iter().zip(&mean).filter_map(|(x, v)| v.map(|v| (*x, axis.y(v)))).collect();
            polyline(&mut svg, &best_pts, "darkorange", false);
            polyline(&mut svg, &mean_pts, "steelblue", true);
            y_ticks(&mut svg, &axis, LEFT, "end", -6.0);
            let _ = writeln!(
                svg,
                "<text x=\"{LEFT}\" y=\"24\" font-size=\"13\">best (solid) and mean (dashed) agreeability, band = mean \u{00b1} 1 std</text>"
            );
        }
        PlotKind::DualAxis => {
            let m1 = data.column(&format!("m1_{criterion}"));
            let m2 = data.column(&format!("m2_{criterion}"));
            let left = Axis::fit(best.iter().flatten().copied());
            let right = Axis::fit(m1.iter().chain(&m2).flatten().copied());
            let _ = writeln!(
                svg,
                "<line x1=\"{0}\" y1=\"{TOP}\" x2=\"{0}\" y2=\"{bottom}\" stroke=\"black\"/>",
                WIDTH - RIGHT
            );
            let pts = |col: &[Option<f64>], axis: &Axis| -> Vec<(f64, f64)> {
                xs.iter().zip(col).filter_map(|(x, v)| v.map(|v| (*x, axis.y(v)))).collect()
            };
            polyline(&mut svg, &pts(&best, &left), "black", false);
            polyline(&mut svg, &pts(&m1, &right), "darkorange", true);
            polyline(&mut svg, &pts(&m2, &right), "seagreen", true);
            y_ticks(&mut svg, &left, LEFT, "end", -6.0);
            y_ticks(&mut svg, &right, WIDTH - RIGHT, "start", 6.0);
            let _ = writeln!(
                svg,
                "<text x=\"{LEFT}\" y=\"24\" font-size=\"13\">agreeability (left, solid); m1 and m2 {criterion} (right, dashed)</text>"
            );
        }
    }
    svg.push_str("</svg>\n");
    svg
}

#[derive(Debug, Clone, PartialEq)]
pub struct PlotFiles {
    pub svg: PathBuf,
    pub data: PathBuf,
}

/// Writes `<kind>.svg` and `<kind>.csv` into `out_dir`.
pub fn emit_plots(run: &ComparisonRun, kind: PlotKind, out_dir: impl AsRef<Path>) -> Result<PlotFiles> {
    let data = plot_data(run, kind)?;
    let out_dir = out_dir.as_ref();
    std::fs::create_dir_all(out_dir).map_err(|e| Error::io(out_dir, e))?;
    let svg = out_dir.join(format!("{}.svg", kind.name()));
    let csv = out_dir.join(format!("{}.csv", kind.name()));
    std::fs::write(&svg, render_svg(&data, run.config.options.criterion.name())).map_err(|e| Error::io(&svg, e))?;
    std::fs::write(&csv, data.to_csv()).map_err(|e| Error::io(&csv, e))?;
    Ok(PlotFiles { svg, data: csv })
}
