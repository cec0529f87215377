//! Standalone SVG line charts of one metric against task index.
//!
//! Run CSVs are grouped into learning systems by file name: the stem with a
//! trailing `seed<N>` or `seed_<N>` (and any `_`/`-` before it) removed, or the parent
//! directory name when nothing is left. Each system is drawn as the mean
//! over its seeds with a shaded band of one standard error.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use super::{mean_and_stderr, RunTable};
use crate::error::{Error, Result};

const WIDTH: f64 = 800.0;
const HEIGHT: f64 = 480.0;
const LEFT: f64 = 80.0;
const RIGHT: f64 = 180.0;
const TOP: f64 = 40.0;
const BOTTOM: f64 = 60.0;

const COLORS: [&str; 8] = [
    "#000000", "#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b", "#17becf",
];
const DASHES: [&str; 3] = ["", "6 3", "2 2"];

/// One learning system: per-task mean and standard error over seeds.
#[derive(Debug, Clone, PartialEq)]
pub struct Series {
    pub label: String,
    pub tasks: Vec<f64>,
    pub mean: Vec<f64>,
    pub stderr: Vec<f64>,
    pub runs: usize,
}

pub fn system_label(path: &Path) -> String {
    let stem = path.file_stem().and_then(|s| s.to_str()).unwrap_or("");
    let mut label = stem;
    if let Some(pos) = stem.rfind("seed") {
        let digits = stem[pos + 4..].trim_start_matches(['_', '-']);
        if !digits.is_empty() && digits.bytes().all(|b| b.is_ascii_digit()) {
            label = stem[..pos].trim_end_matches(['_', '-']);
        }
    }
    if label.is_empty() {
        path.parent()
            .and_then(|p| p.file_name())
            .and_then(|n| n.to_str())
            .unwrap_or("run")
            .to_string()
    } else {
        label.to_string()
    }
}

/// Reads `metric` from every CSV and aggregates per system and task.
pub fn read_series(paths: &[PathBuf], metric: &str) -> Result<Vec<Series>> {
    if paths.is_empty() {
        return Err(Error::Input("no run CSVs given".into()));
    }
    // label -> task -> values
    let mut groups: BTreeMap<String, (usize, BTreeMap<u64, Vec<f64>>)> = BTreeMap::new();
    for path in paths {
        let table = RunTable::read(path)?;
        let values = table.column(metric).ok_or_else(|| {
            Error::Input(format!(
                "{} has no `{metric}` column (columns: {})",
                path.display(),
                table.columns.join(", ")
            ))
        })?;
        let tasks = table
            .column("task")
            .ok_or_else(|| Error::Input(format!("{} has no `task` column", path.display())))?;
        let entry = groups.entry(system_label(path)).or_default();
        entry.0 += 1;
        for (t, v) in tasks.into_iter().zip(values) {
            entry.1.entry(t as u64).or_default().push(v);
        }
    }
    Ok(groups
        .into_iter()
        .map(|(label, (runs, by_task))| {
            let mut s = Series {
                label,
                tasks: Vec::new(),
                mean: Vec::new(),
                stderr: Vec::new(),
                runs,
            };
            for (t, vals) in by_task {
                let (m, se) = mean_and_stderr(&vals);
                s.tasks.push(t as f64);
                s.mean.push(m);
                s.stderr.push(se);
            }
            s
        })
        .collect())
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;")
        .replace('<', "&lt;")
        .replace('>', "&gt;")
        .replace('"', "&quot;")
}

fn tick_label(v: f64) -> String {
    let a = v.abs();
    if a != 0.0 && !(1e-3..1e5).contains(&a) {
        format!("{v:.2e}")
    } else {
        let s = format!("{v:.4}");
        let s = s.trim_end_matches('0').trim_end_matches('.');
        if s == "-0" { "0".into() } else { s.to_string() }
    }
}

fn range(lo: f64, hi: f64) -> (f64, f64) {
    if hi > lo {
        let pad = 0.05 * (hi - lo);
        (lo - pad, hi + pad)
    } else {
        let pad = if lo == 0.0 { 1.0 } else { 0.1 * lo.abs() };
        (lo - pad, hi + pad)
    }
}

pub fn render_svg(series: &[Series], metric: &str) -> String {
    let finite = |v: &f64| v.is_finite();
    let xs = series.iter().flat_map(|s| s.tasks.iter().copied());
    let (x_lo, x_hi) = xs.fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), x| (a.min(x), b.max(x)));
    let ys = series.iter().flat_map(|s| {
        s.mean.iter().zip(&s.stderr).flat_map(|(m, e)| [m - e, m + e])
    });
    let (y_lo, y_hi) = ys
        .filter(finite)
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), y| (a.min(y), b.max(y)));
    let (x_lo, x_hi) = if x_lo.is_finite() { (x_lo, x_hi.max(x_lo + 1.0)) } else { (0.0, 1.0) };
    let (y_lo, y_hi) = if y_lo.is_finite() { range(y_lo, y_hi) } else { (0.0, 1.0) };

    let plot_w = WIDTH - LEFT - RIGHT;
    let plot_h = HEIGHT - TOP - BOTTOM;
    let px = |x: f64| LEFT + (x - x_lo) / (x_hi - x_lo) * plot_w;
    let py = |y: f64| TOP + (y_hi - y) / (y_hi - y_lo) * plot_h;

    let mut svg = String::new();
    let _ = writeln!(
        svg,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}" font-family="sans-serif" font-size="12">"#
    );
    let _ = writeln!(svg, r#"<rect width="{WIDTH}" height="{HEIGHT}" fill="white"/>"#);
    let _ = writeln!(
        svg,
        r#"<text x="{:.2}" y="24" text-anchor="middle" font-size="15">{}</text>"#,
        LEFT + plot_w / 2.0,
        escape(metric)
    );

    // axes and ticks
    let _ = writeln!(
        svg,
        r#"<path d="M{LEFT:.2},{TOP:.2} V{:.2} H{:.2}" fill="none" stroke="black"/>"#,
        TOP + plot_h,
        LEFT + plot_w
    );
    for i in 0..=5 {
        let f = i as f64 / 5.0;
        let xv = x_lo + f * (x_hi - x_lo);
        let yv = y_lo + f * (y_hi - y_lo);
        let (x, y) = (px(xv), py(yv));
        let _ = writeln!(
            svg,
            r#"<line x1="{x:.2}" y1="{:.2}" x2="{x:.2}" y2="{:.2}" stroke="black"/><text x="{x:.2}" y="{:.2}" text-anchor="middle">{}</text>"#,
            TOP + plot_h,
            TOP + plot_h + 5.0,
            TOP + plot_h + 20.0,
            tick_label(xv)
        );
        let _ = writeln!(
            svg,
            r#"<line x1="{:.2}" y1="{y:.2}" x2="{LEFT:.2}" y2="{y:.2}" stroke="black"/><text x="{:.2}" y="{:.2}" text-anchor="end">{}</text>"#,
            LEFT - 5.0,
            LEFT - 8.0,
            y + 4.0,
            tick_label(yv)
        );
    }
    let _ = writeln!(
        svg,
        r#"<text x="{:.2}" y="{:.2}" text-anchor="middle">task</text>"#,
        LEFT + plot_w / 2.0,
        HEIGHT - 15.0
    );

    for (i, s) in series.iter().enumerate() {
        let color = COLORS[i % COLORS.len()];
        let dash = DASHES[(i / COLORS.len()) % DASHES.len()];
        let pts: Vec<(f64, f64, f64)> = s
            .tasks
            .iter()
            .zip(&s.mean)
            .zip(&s.stderr)
            .filter(|((_, m), e)| m.is_finite() && e.is_finite())
            .map(|((t, m), e)| (*t, *m, *e))
            .collect();
        let mut band = String::new();
        for &(t, m, e) in &pts {
            let _ = write!(band, "{:.2},{:.2} ", px(t), py(m + e));
        }
        for &(t, m, e) in pts.iter().rev() {
            let _ = write!(band, "{:.2},{:.2} ", px(t), py(m - e));
        }
        let _ = writeln!(
            svg,
            r#"<polygon class="band" points="{}" fill="{color}" fill-opacity="0.2" stroke="none"/>"#,
            band.trim_end()
        );
        let line: Vec<String> = pts.iter().map(|&(t, m, _)| format!("{:.2},{:.2}", px(t), py(m))).collect();
        let dash_attr = if dash.is_empty() { String::new() } else { format!(r#" stroke-dasharray="{dash}""#) };
        let _ = writeln!(
            svg,
            r#"<polyline class="line" points="{}" fill="none" stroke="{color}" stroke-width="1.5"{dash_attr}/>"#,
            line.join(" ")
        );
        let ly = TOP + 10.0 + 20.0 * i as f64;
        let lx = LEFT + plot_w + 15.0;
        let _ = writeln!(
            svg,
            r#"<g class="legend"><line x1="{lx:.2}" y1="{ly:.2}" x2="{:.2}" y2="{ly:.2}" stroke="{color}" stroke-width="2"{dash_attr}/><text x="{:.2}" y="{:.2}">{} (n={})</text></g>"#,
            lx + 25.0,
            lx + 30.0,
            ly + 4.0,
            escape(&s.label),
            s.runs
        );
    }
    svg.push_str("</svg>\n");
    svg
}

/// Reads the CSVs, renders `metric` and writes the SVG to `out`.
pub fn emit_plot(paths: &[PathBuf], metric: &str, out: &Path) -> Result<Vec<Series>> {
    let series = read_series(paths, metric)?;
    if let Some(dir) = out.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir)?;
    }
    fs::write(out, render_svg(&series, metric))?;
    Ok(series)
}
