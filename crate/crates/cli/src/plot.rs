//! Minimal self-contained SVG 1.1 plots.

use std::fmt::Write as _;
use std::path::Path;

use crate::error::{CliError, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PlotKind {
    /// Linear axes, one polyline per series.
    Trajectory,
    /// Log-log axes, polylines with markers.
    ConvergenceLogLog,
    /// Linear axes, markers only.
    Spectrum,
    /// Linear axes, markers joined by a line.
    Sweep,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Series {
    pub name: String,
    pub points: Vec<(f64, f64)>,
}

impl Series {
    pub fn new(name: impl Into<String>, points: Vec<(f64, f64)>) -> Self {
        Self {
            name: name.into(),
            points,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PlotData {
    pub title: String,
    pub x_label: String,
    pub y_label: String,
    pub series: Vec<Series>,
}

const WIDTH: f64 = 640.0;
const HEIGHT: f64 = 420.0;
const LEFT: f64 = 80.0;
const RIGHT: f64 = 150.0;
const TOP: f64 = 40.0;
const BOTTOM: f64 = 60.0;
const COLORS: [&str; 8] = [
    "#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b", "#e377c2", "#17becf",
];

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;").replace('"', "&quot;")
}

struct Axis {
    lo: f64,
    hi: f64,
    log: bool,
}

impl Axis {
    fn new(values: impl Iterator<Item = f64>, log: bool) -> Self {
        let (mut lo, mut hi) = values.fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), v| {
            let v = if log { v.log10() } else { v };
            (a.min(v), b.max(v))
        });
        if hi - lo < 1e-12 * hi.abs().max(1.0) {
            let pad = if lo == 0.0 { 1.0 } else { 0.1 * lo.abs() };
            lo -= pad;
            hi += pad;
        }
        Self { lo, hi, log }
    }

    fn fraction(&self, v: f64) -> f64 {
        let v = if self.log { v.log10() } else { v };
        (v - self.lo) / (self.hi - self.lo)
    }

    fn ticks(&self) -> Vec<(f64, String)> {
        if self.log {
            let (a, b) = (self.lo.floor() as i32, self.hi.ceil() as i32);
            let step = ((b - a) / 6).max(1);
            (a..=b)
                .step_by(step as usize)
                .map(|e| 10f64.powi(e))
                .filter(|v| (self.lo - 1e-9..=self.hi + 1e-9).contains(&v.log10()))
                .map(|v| (v, format!("1e{}", v.log10().round() as i32)))
                .collect()
        } else {
            (0..=5)
                .map(|i| {
                    let v = self.lo + (self.hi - self.lo) * i as f64 / 5.0;
                    (v, format!("{v:.3}"))
                })
                .collect()
        }
    }
}

/// Renders `data` as an SVG document.
pub fn render(data: &PlotData, kind: PlotKind) -> Result<String> {
    let log = kind == PlotKind::ConvergenceLogLog;
    let usable = |&(x, y): &(f64, f64)| x.is_finite() && y.is_finite() && (!log || (x > 0.0 && y > 0.0));
    let series: Vec<Series> = data
        .series
        .iter()
        .map(|s| Series::new(s.name.clone(), s.points.iter().copied().filter(usable).collect()))
        .filter(|s| !s.points.is_empty())
        .collect();
    if series.is_empty() {
        return Err(CliError::Plot(format!("nothing to plot for {:?}", data.title)));
    }
    let all = || series.iter().flat_map(|s| s.points.iter().copied());
    let xa = Axis::new(all().map(|p| p.0), log);
    let ya = Axis::new(all().map(|p| p.1), log);
    let (pw, ph) = (WIDTH - LEFT - RIGHT, HEIGHT - TOP - BOTTOM);
    let px = |x: f64| LEFT + xa.fraction(x) * pw;
    let py = |y: f64| TOP + (1.0 - ya.fraction(y)) * ph;

    let mut svg = String::new();
    let w = &mut svg;
    writeln!(w, r#"<?xml version="1.0" encoding="UTF-8"?>"#).unwrap();
    writeln!(
        w,
        r#"<svg xmlns="http://www.w3.org/2000/svg" version="1.1" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}" font-family="sans-serif" font-size="12">"#
    )
    .unwrap();
    writeln!(w, r#"<rect x="0" y="0" width="{WIDTH}" height="{HEIGHT}" fill="white"/>"#).unwrap();
    writeln!(
        w,
        r#"<text x="{}" y="24" text-anchor="middle" font-size="15">{}</text>"#,
        LEFT + pw / 2.0,
        escape(&data.title)
    )
    .unwrap();
    writeln!(
        w,
        r#"<rect x="{LEFT}" y="{TOP}" width="{pw}" height="{ph}" fill="none" stroke="black"/>"#
    )
    .unwrap();
    for (v, label) in xa.ticks() {
        let x = px(v);
        writeln!(
            w,
            r##"<line x1="{x:.2}" y1="{:.2}" x2="{x:.2}" y2="{:.2}" stroke="#888"/><text x="{x:.2}" y="{:.2}" text-anchor="middle">{label}</text>"##,
            TOP + ph,
            TOP + ph + 5.0,
            TOP + ph + 20.0
        )
        .unwrap();
    }
    for (v, label) in ya.ticks() {
        let y = py(v);
        writeln!(
            w,
            r##"<line x1="{:.2}" y1="{y:.2}" x2="{LEFT}" y2="{y:.2}" stroke="#888"/><text x="{:.2}" y="{:.2}" text-anchor="end">{label}</text>"##,
            LEFT - 5.0,
            LEFT - 8.0,
            y + 4.0
        )
        .unwrap();
    }
    writeln!(
        w,
        r#"<text x="{:.2}" y="{:.2}" text-anchor="middle">{}</text>"#,
        LEFT + pw / 2.0,
        HEIGHT - 15.0,
        escape(&data.x_label)
    )
    .unwrap();
    writeln!(
        w,
        r#"<text x="18" y="{:.2}" text-anchor="middle" transform="rotate(-90 18 {:.2})">{}</text>"#,
        TOP + ph / 2.0,
        TOP + ph / 2.0,
        escape(&data.y_label)
    )
    .unwrap();

    let line = matches!(kind, PlotKind::Trajectory | PlotKind::ConvergenceLogLog | PlotKind::Sweep);
    let markers = !matches!(kind, PlotKind::Trajectory);
    for (i, s) in series.iter().enumerate() {
        let color = COLORS[i % COLORS.len()];
        if line && s.points.len() > 1 {
            let pts: Vec<String> = s.points.iter().map(|&(x, y)| format!("{:.2},{:.2}", px(x), py(y))).collect();
            writeln!(
                w,
                r#"<polyline fill="none" stroke="{color}" stroke-width="1.5" points="{}"/>"#,
                pts.join(" ")
            )
            .unwrap();
        }
        if markers || s.points.len() == 1 {
            for &(x, y) in &s.points {
                writeln!(w, r#"<circle cx="{:.2}" cy="{:.2}" r="3" fill="{color}"/>"#, px(x), py(y)).unwrap();
            }
        }
        let ly = TOP + 10.0 + 18.0 * i as f64;
        writeln!(
            w,
            r#"<rect x="{:.2}" y="{:.2}" width="12" height="12" fill="{color}"/><text x="{:.2}" y="{:.2}">{}</text>"#,
            WIDTH - RIGHT + 12.0,
            ly,
            WIDTH - RIGHT + 30.0,
            ly + 10.0,
            escape(&s.name)
        )
        .unwrap();
    }
    writeln!(w, "</svg>").unwrap();
    Ok(svg)
}

pub fn emit_plot(data: &PlotData, kind: PlotKind, path: &Path) -> Result<()> {
    let svg = render(data, kind)?;
    std::fs::write(path, svg).map_err(|source| CliError::Output {
        path: path.to_path_buf(),
        source,
    })
}
