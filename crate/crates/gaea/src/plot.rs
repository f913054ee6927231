//! Self-contained SVG line plots of summaries.

use std::fmt::Write;

use gaea_core::record::series;
use serde::{Deserialize, Serialize};

use crate::aggregate::{Band, Summary};
use crate::error::{HarnessError, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PlotKind {
    Entropy,
    Loss,
    StationarityVsT,
}

impl std::str::FromStr for PlotKind {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "entropy" => Ok(PlotKind::Entropy),
            "loss" => Ok(PlotKind::Loss),
            "stationarity-vs-t" | "stationarity-vs-T" | "stationarity" => Ok(PlotKind::StationarityVsT),
            other => Err(format!("unknown plot kind '{other}' (entropy, loss, stationarity-vs-T)")),
        }
    }
}

impl std::fmt::Display for PlotKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            PlotKind::Entropy => "entropy",
            PlotKind::Loss => "loss",
            PlotKind::StationarityVsT => "stationarity-vs-T",
        })
    }
}

const WIDTH: f64 = 720.0;
const HEIGHT: f64 = 440.0;
const LEFT: f64 = 70.0;
const RIGHT: f64 = 170.0;
const TOP: f64 = 40.0;
const BOTTOM: f64 = 50.0;
const MAX_POINTS: usize = 400;
const PALETTE: [&str; 6] = ["#1b6ca8", "#d1495b", "#2e8b57", "#edae49", "#6a4c93", "#444444"];

/// One labelled line with an optional interquartile band.
#[derive(Debug, Clone)]
struct Line {
    label: String,
    x: Vec<f64>,
    y: Vec<f64>,
    lo: Vec<f64>,
    hi: Vec<f64>,
}

struct Axes {
    x: (f64, f64),
    y: (f64, f64),
    log: bool,
}

impl Axes {
    fn map(v: f64, range: (f64, f64), log: bool) -> f64 {
        let (v, a, b) = if log { (v.ln(), range.0.ln(), range.1.ln()) } else { (v, range.0, range.1) };
        if b == a {
            0.5
        } else {
            (v - a) / (b - a)
        }
    }

    fn px(&self, x: f64) -> f64 {
        LEFT + Self::map(x, self.x, self.log) * (WIDTH - LEFT - RIGHT)
    }

    fn py(&self, y: f64) -> f64 {
        HEIGHT - BOTTOM - Self::map(y, self.y, self.log) * (HEIGHT - TOP - BOTTOM)
    }
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;").replace('"', "&quot;")
}

fn fmt_tick(v: f64) -> String {
    if v != 0.0 && (v.abs() >= 1e4 || v.abs() < 1e-2) {
        format!("{v:.1e}")
    } else {
        let s = format!("{v:.3}");
        s.trim_end_matches('0').trim_end_matches('.').to_string()
    }
}

fn linear_ticks(lo: f64, hi: f64) -> Vec<f64> {
    if !(hi > lo) {
        return vec![lo];
    }
    let raw = (hi - lo) / 5.0;
    let mag = 10f64.powf(raw.log10().floor());
    let step = [1.0, 2.0, 5.0, 10.0].iter().map(|m| m * mag).find(|s| *s >= raw).unwrap_or(10.0 * mag);
    let first = (lo / step - 1e-9).ceil() as i64;
    let last = (hi / step + 1e-9).floor() as i64;
    (first..=last).map(|k| k as f64 * step).collect()
}

fn log_ticks(lo: f64, hi: f64) -> Vec<f64> {
    let (a, b) = (lo.log10().floor() as i32, hi.log10().ceil() as i32);
    (a..=b).map(|e| 10f64.powi(e)).filter(|v| *v >= lo * (1.0 - 1e-9) && *v <= hi * (1.0 + 1e-9)).collect()
}

fn band_line(label: &str, band: &Band) -> Line {
    let n = band.median.len();
    let stride = n.div_ceil(MAX_POINTS).max(1);
    let idx: Vec<usize> = (0..n).step_by(stride).chain((n > 0 && !(n - 1).is_multiple_of(stride)).then_some(n - 1)).collect();
    Line {
        label: label.to_string(),
        x: idx.iter().map(|i| (*i + 1) as f64).collect(),
        y: idx.iter().map(|i| band.median[*i]).collect(),
        lo: idx.iter().map(|i| band.q1[*i]).collect(),
        hi: idx.iter().map(|i| band.q3[*i]).collect(),
    }
}

fn lines_for(summary: &Summary, kind: PlotKind) -> Vec<(Line, Option<f64>)> {
    match kind {
        PlotKind::Entropy => summary
            .groups
            .iter()
            .filter_map(|g| g.series.get(series::ENTROPY).map(|b| (band_line(&g.name, b), None)))
            .collect(),
        PlotKind::Loss => summary
            .groups
            .iter()
            .filter_map(|g| {
                g.series.get(series::TRAIN_LOSS).or_else(|| g.series.get(series::LOSS)).map(|b| (band_line(&g.name, b), None))
            })
            .collect(),
        PlotKind::StationarityVsT => summary
            .curves
            .iter()
            .map(|c| {
                let line = Line {
                    label: c.variant.clone(),
                    x: c.points.iter().map(|p| p.horizon as f64).collect(),
                    y: c.points.iter().map(|p| p.mean).collect(),
                    lo: c.points.iter().map(|p| p.q1).collect(),
                    hi: c.points.iter().map(|p| p.q3).collect(),
                };
                (line, c.slope)
            })
            .collect(),
    }
}

/// Renders `kind` from `summary`; fails when the summary has no matching data.
pub fn render(summary: &Summary, kind: PlotKind) -> Result<String> {
    let lines = lines_for(summary, kind);
    if lines.is_empty() {
        return Err(HarnessError::Data(format!("summary '{}' has no data for a {kind:?} plot", summary.experiment)));
    }
    let log = kind == PlotKind::StationarityVsT;
    let finite = |v: &f64| v.is_finite() && (!log || *v > 0.0);
    let xs: Vec<f64> = lines.iter().flat_map(|(l, _)| l.x.iter().copied()).filter(finite).collect();
    let ys: Vec<f64> =
        lines.iter().flat_map(|(l, _)| l.lo.iter().chain(&l.hi).chain(&l.y).copied()).filter(finite).collect();
    if xs.is_empty() || ys.is_empty() {
        return Err(HarnessError::Data("nothing finite to plot".into()));
    }
    let range = |v: &[f64]| (v.iter().copied().fold(f64::INFINITY, f64::min), v.iter().copied().fold(f64::NEG_INFINITY, f64::max));
    let (mut y0, mut y1) = range(&ys);
    if !log {
        let pad = 0.05 * (y1 - y0).max(1e-12);
        y0 -= pad;
        y1 += pad;
    }
    let axes = Axes { x: range(&xs), y: (y0, y1), log };

    let (title, xlabel, ylabel) = match kind {
        PlotKind::Entropy => ("Mean edge entropy", "epoch", "entropy (nats)"),
        PlotKind::Loss => ("Training loss", "step", "loss"),
        PlotKind::StationarityVsT => ("Stationarity against horizon", "T", "mean stationarity"),
    };
    let mut svg = String::new();
    let _ = writeln!(
        svg,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}" font-family="sans-serif" font-size="12">"#
    );
    let _ = writeln!(svg, r#"<rect width="{WIDTH}" height="{HEIGHT}" fill="white"/>"#);
    let _ = writeln!(
        svg,
        r#"<text x="{}" y="22" text-anchor="middle" font-size="15">{} ({})</text>"#,
        (LEFT + WIDTH - RIGHT) / 2.0,
        title,
        escape(&summary.experiment)
    );

    // axes and ticks
    let (bx0, by0, bx1, by1) = (LEFT, TOP, WIDTH - RIGHT, HEIGHT - BOTTOM);
    let _ = writeln!(svg, r##"<rect x="{bx0}" y="{by0}" width="{}" height="{}" fill="none" stroke="#888"/>"##, bx1 - bx0, by1 - by0);
    let (xt, yt) = if log {
        (log_ticks(axes.x.0, axes.x.1), log_ticks(axes.y.0, axes.y.1))
    } else {
        (linear_ticks(axes.x.0, axes.x.1), linear_ticks(axes.y.0, axes.y.1))
    };
    let xt = if log && xt.len() < 2 { xs.clone() } else { xt };
    for t in xt {
        let x = axes.px(t);
        let _ = writeln!(svg, r##"<line x1="{x:.2}" y1="{by1}" x2="{x:.2}" y2="{}" stroke="#888"/>"##, by1 + 5.0);
        let _ = writeln!(svg, r#"<text x="{x:.2}" y="{}" text-anchor="middle">{}</text>"#, by1 + 18.0, fmt_tick(t));
    }
    for t in yt {
        let y = axes.py(t);
        let _ = writeln!(svg, r##"<line x1="{}" y1="{y:.2}" x2="{bx0}" y2="{y:.2}" stroke="#888"/>"##, bx0 - 5.0);
        let _ = writeln!(svg, r#"<text x="{}" y="{:.2}" text-anchor="end">{}</text>"#, bx0 - 8.0, y + 4.0, fmt_tick(t));
    }
    let _ = writeln!(svg, r#"<text x="{}" y="{}" text-anchor="middle">{xlabel}</text>"#, (bx0 + bx1) / 2.0, HEIGHT - 12.0);
    let _ = writeln!(
        svg,
        r#"<text x="16" y="{0}" text-anchor="middle" transform="rotate(-90 16 {0})">{ylabel}</text>"#,
        (by0 + by1) / 2.0
    );

    for (i, (line, slope)) in lines.iter().enumerate() {
        let color = PALETTE[i % PALETTE.len()];
        let label = escape(&line.label);
        let _ = writeln!(svg, r#"<g class="series" data-label="{label}">"#);
        let pts: Vec<usize> = (0..line.x.len()).filter(|j| finite(&line.x[*j]) && finite(&line.y[*j])).collect();
        let band: Vec<usize> = pts.iter().copied().filter(|j| finite(&line.lo[*j]) && finite(&line.hi[*j])).collect();
        if band.len() > 1 {
            let mut d = String::new();
            for (k, j) in band.iter().enumerate() {
                let _ = write!(d, "{}{:.2},{:.2} ", if k == 0 { "M" } else { "L" }, axes.px(line.x[*j]), axes.py(line.hi[*j]));
            }
            for j in band.iter().rev() {
                let _ = write!(d, "L{:.2},{:.2} ", axes.px(line.x[*j]), axes.py(line.lo[*j]));
            }
            let _ = writeln!(svg, r#"<path d="{}Z" fill="{color}" fill-opacity="0.18" stroke="none"/>"#, d);
        }
        let mut d = String::new();
        for (k, j) in pts.iter().enumerate() {
            let _ = write!(d, "{}{:.2},{:.2} ", if k == 0 { "M" } else { "L" }, axes.px(line.x[*j]), axes.py(line.y[*j]));
        }
        let _ = writeln!(svg, r#"<path d="{}" fill="none" stroke="{color}" stroke-width="2"/>"#, d.trim_end());
        if log {
            for j in &pts {
                let _ = writeln!(svg, r#"<circle cx="{:.2}" cy="{:.2}" r="3" fill="{color}"/>"#, axes.px(line.x[*j]), axes.py(line.y[*j]));
            }
        }
        let ly = TOP + 14.0 + 20.0 * i as f64;
        let _ = writeln!(svg, r#"<line x1="{}" y1="{ly}" x2="{}" y2="{ly}" stroke="{color}" stroke-width="3"/>"#, bx1 + 12.0, bx1 + 32.0);
        let text = match slope {
            Some(s) => format!("{label} (slope {s:.3})"),
            None => label.clone(),
        };
        let _ = writeln!(svg, r#"<text x="{}" y="{}">{text}</text>"#, bx1 + 38.0, ly + 4.0);
        let _ = writeln!(svg, "</g>");
    }
    svg.push_str("</svg>\n");
    Ok(svg)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ticks_are_round_numbers() {
        let t = linear_ticks(0.0, 1.0);
        assert_eq!(t.len(), 6);
        assert_eq!((t[0], t[1], t[5]), (0.0, 0.2, 1.0));
        assert_eq!(linear_ticks(0.3, 1.2).first(), Some(&0.4));
        assert_eq!(log_ticks(50.0, 5000.0), vec![100.0, 1000.0]);
        assert_eq!(fmt_tick(0.5), "0.5");
        assert_eq!(fmt_tick(2.0), "2");
    }

    #[test]
    fn kinds_parse() {
        assert_eq!("stationarity-vs-T".parse::<PlotKind>().unwrap(), PlotKind::StationarityVsT);
        assert!("histogram".parse::<PlotKind>().is_err());
    }
}
