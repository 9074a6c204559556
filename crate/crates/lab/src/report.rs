//! Summaries and SVG plots recomputed from a results directory.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use thiserror::Error;

use crate::config::{Config, ConfigError};
use crate::experiments::{summarize, ExperimentError, Plot, Summary};
use crate::records::{read_table, RecordError};

#[derive(Debug, Error)]
pub enum ReportError {
    #[error("{0}: no record files")]
    Empty(PathBuf),
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("{path}: config sidecar missing")]
    NoConfig { path: PathBuf },
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Records(#[from] RecordError),
    #[error(transparent)]
    Experiment(#[from] ExperimentError),
}

/// File stem shared by all outputs of one configuration.
pub fn stem(cfg: &Config) -> String {
    format!("{}-{}", cfg.experiment.name(), cfg.short_digest())
}

pub fn records_path(dir: &Path, cfg: &Config) -> PathBuf {
    dir.join(format!("{}.csv", stem(cfg)))
}

pub fn sidecar(records: &Path, suffix: &str) -> PathBuf {
    let stem = records.file_stem().and_then(|s| s.to_str()).unwrap_or("run");
    records.with_file_name(format!("{stem}.{suffix}"))
}

fn write(path: PathBuf, text: &str) -> Result<(), ReportError> {
    fs::write(&path, text).map_err(|source| ReportError::Io { path, source })
}

/// Writes the summary, its extra files and its plots next to `records`.
pub fn write_outputs(records: &Path, summary: &Summary) -> Result<(), ReportError> {
    write(sidecar(records, "summary.txt"), &summary.to_text())?;
    for (suffix, text) in &summary.files {
        write(sidecar(records, suffix), text)?;
    }
    for p in &summary.plots {
        write(sidecar(records, &format!("{}.svg", p.name)), &svg(p))?;
    }
    Ok(())
}

/// Record files of a directory: `<experiment>-<digest>.csv`, no inner dot.
pub fn record_files(dir: &Path) -> Result<Vec<PathBuf>, ReportError> {
    let rd = fs::read_dir(dir).map_err(|source| ReportError::Io { path: dir.into(), source })?;
    let mut out: Vec<PathBuf> = rd
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|e| e == "csv") && p.file_stem().and_then(|s| s.to_str()).is_some_and(|s| !s.contains('.')))
        .collect();
    out.sort();
    Ok(out)
}

/// Recomputes every summary in `dir`; returns them with their record paths
/// and writes `report.txt` collecting them.
pub fn report(dir: &Path) -> Result<Vec<(PathBuf, Summary)>, ReportError> {
    let files = record_files(dir)?;
    if files.is_empty() {
        return Err(ReportError::Empty(dir.into()));
    }
    let mut all = Vec::new();
    let mut text = String::new();
    for f in files {
        let cfg_path = sidecar(&f, "config");
        if !cfg_path.exists() {
            return Err(ReportError::NoConfig { path: f });
        }
        let cfg = Config::load_any(&cfg_path)?;
        let summary = summarize(&cfg, read_table(&f)?)?;
        write_outputs(&f, &summary)?;
        let _ = writeln!(text, "[{}]\n{}", f.file_name().and_then(|s| s.to_str()).unwrap_or(""), summary.to_text());
        all.push((f, summary));
    }
    write(dir.join("report.txt"), &text)?;
    Ok(all)
}

const W: f64 = 640.0;
const H: f64 = 440.0;
const M: f64 = 64.0;

fn nice_ticks(lo: f64, hi: f64) -> Vec<f64> {
    let span = (hi - lo).max(1e-12);
    let raw = span / 5.0;
    let mag = 10f64.powf(raw.log10().floor());
    let step = [1.0, 2.0, 5.0, 10.0].iter().map(|m| m * mag).find(|s| *s >= raw).unwrap_or(10.0 * mag);
    let mut t = (lo / step).ceil() * step;
    let mut out = Vec::new();
    while t <= hi + 1e-9 * step {
        out.push(if t.abs() < 1e-12 * step { 0.0 } else { t });
        t += step;
    }
    out
}

fn esc(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

/// A plain scatter/line plot with ticked axes.
pub fn svg(p: &Plot) -> String {
    let all: Vec<(f64, f64)> = p.points.iter().chain(&p.curve).copied().filter(|(x, y)| x.is_finite() && y.is_finite()).collect();
    let (mut x0, mut x1, mut y0, mut y1) = all.iter().fold((f64::INFINITY, f64::NEG_INFINITY, f64::INFINITY, f64::NEG_INFINITY), |a, (x, y)| {
        (a.0.min(*x), a.1.max(*x), a.2.min(*y), a.3.max(*y))
    });
    if all.is_empty() {
        (x0, x1, y0, y1) = (0.0, 1.0, 0.0, 1.0);
    }
    if p.polygon {
        let r = [x0.abs(), x1.abs(), y0.abs(), y1.abs()].into_iter().fold(0.0, f64::max);
        (x0, x1, y0, y1) = (-r, r, -r, r);
    }
    let pad = |a: f64, b: f64| {
        let d = if b > a { 0.05 * (b - a) } else { 0.5 };
        (a - d, b + d)
    };
    (x0, x1) = pad(x0, x1);
    (y0, y1) = pad(y0, y1);
    let sx = |x: f64| M + (x - x0) / (x1 - x0) * (W - 1.5 * M);
    let sy = |y: f64| H - M - (y - y0) / (y1 - y0) * (H - 1.5 * M);
    let mut s = String::new();
    let _ = writeln!(s, r#"<svg xmlns="http://www.w3.org/2000/svg" width="{W}" height="{H}" viewBox="0 0 {W} {H}" font-family="sans-serif" font-size="12">"#);
    let _ = writeln!(s, r#"<rect width="100%" height="100%" fill="white"/>"#);
    let _ = writeln!(s, r#"<text x="{}" y="24" text-anchor="middle" font-size="15">{}</text>"#, W / 2.0, esc(&p.title));
    let _ = writeln!(s, r#"<g stroke="black" fill="none"><line x1="{M}" y1="{}" x2="{}" y2="{}"/><line x1="{M}" y1="{}" x2="{M}" y2="{}"/></g>"#, H - M, W - M / 2.0, H - M, H - M, M / 2.0);
    for t in nice_ticks(x0, x1) {
        let x = sx(t);
        let _ = writeln!(s, r#"<line x1="{x:.2}" y1="{}" x2="{x:.2}" y2="{}" stroke="black"/><text x="{x:.2}" y="{}" text-anchor="middle">{}</text>"#, H - M, H - M + 5.0, H - M + 18.0, fmt_tick(t));
    }
    for t in nice_ticks(y0, y1) {
        let y = sy(t);
        let _ = writeln!(s, r#"<line x1="{}" y1="{y:.2}" x2="{M}" y2="{y:.2}" stroke="black"/><text x="{}" y="{:.2}" text-anchor="end">{}</text>"#, M - 5.0, M - 8.0, y + 4.0, fmt_tick(t));
    }
    let _ = writeln!(s, r#"<text x="{}" y="{}" text-anchor="middle">{}</text>"#, M + (W - 1.5 * M) / 2.0, H - 16.0, esc(&p.x_label));
    let _ = writeln!(s, r#"<text x="16" y="{}" text-anchor="middle" transform="rotate(-90 16 {})">{}</text>"#, H / 2.0, H / 2.0, esc(&p.y_label));
    let path = |pts: &[(f64, f64)]| pts.iter().map(|(x, y)| format!("{:.2},{:.2}", sx(*x), sy(*y))).collect::<Vec<_>>().join(" ");
    if p.polygon {
        let _ = writeln!(s, r#"<polygon points="{}" fill="none" stroke="steelblue" stroke-width="1.5"/>"#, path(&p.points));
        let _ = writeln!(s, r#"<circle cx="{:.2}" cy="{:.2}" r="2.5" fill="black"/>"#, sx(0.0), sy(0.0));
    } else {
        for (x, y) in p.points.iter().filter(|(x, y)| x.is_finite() && y.is_finite()) {
            let _ = writeln!(s, r#"<circle cx="{:.2}" cy="{:.2}" r="2.5" fill="steelblue"/>"#, sx(*x), sy(*y));
        }
    }
    if p.curve.len() > 1 {
        let _ = writeln!(s, r#"<polyline points="{}" fill="none" stroke="firebrick" stroke-width="1.5"/>"#, path(&p.curve));
    }
    s.push_str("</svg>\n");
    s
}

fn fmt_tick(t: f64) -> String {
    let r = (t * 1e6).round() / 1e6;
    format!("{r}")
}
