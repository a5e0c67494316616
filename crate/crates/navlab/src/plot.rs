//! Self-contained SVG charts: line charts, heatmaps with a colorbar, and
//! training curves.

use std::fmt::Write as _;
use std::path::Path;

use navlab_core::filters::DenoiserKind;
use serde::Deserialize;
use thiserror::Error;

use crate::eval::{fmt_g9, CellResult};
use crate::sweep::SweepKind;

#[derive(Debug, Error)]
pub enum PlotError {
    #[error("nothing to plot: {0}")]
    Empty(String),
    #[error("malformed training log {path}: {message}")]
    TrainLog { path: String, message: String },
    #[error("i/o error on {path}: {source}")]
    Io { path: String, source: std::io::Error },
}

const W: f64 = 640.0;
const H: f64 = 420.0;
const LEFT: f64 = 72.0;
const RIGHT: f64 = 150.0;
const TOP: f64 = 40.0;
const BOTTOM: f64 = 56.0;
const PALETTE: [&str; 6] = ["#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b"];

#[derive(Clone, Debug, PartialEq)]
pub struct Series {
    pub name: String,
    pub points: Vec<(f64, f64)>,
}

fn esc(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;").replace('"', "&quot;")
}

fn span(lo: f64, hi: f64) -> (f64, f64) {
    if hi > lo {
        (lo, hi)
    } else {
        (lo - 0.5, hi + 0.5)
    }
}

/// Roughly five round tick values covering `[lo, hi]`.
fn ticks(lo: f64, hi: f64) -> Vec<f64> {
    let raw = (hi - lo) / 5.0;
    let mag = 10f64.powf(raw.log10().floor());
    let step = [1.0, 2.0, 2.5, 5.0, 10.0]
        .iter()
        .map(|m| m * mag)
        .min_by(|a, b| (a / raw).ln().abs().total_cmp(&(b / raw).ln().abs()))
        .unwrap_or(mag);
    let mut t = (lo / step).ceil() * step;
    let mut out = Vec::new();
    while t <= hi + step * 1e-9 {
        out.push(if t.abs() < step * 1e-9 { 0.0 } else { t });
        t += step;
    }
    out
}

fn header(out: &mut String, title: &str) {
    let _ = writeln!(
        out,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{W}" height="{H}" viewBox="0 0 {W} {H}" font-family="sans-serif" font-size="12">"#
    );
    let _ = writeln!(out, r#"<rect width="{W}" height="{H}" fill="white"/>"#);
    let _ = writeln!(out, r#"<text x="{}" y="22" text-anchor="middle" font-size="15">{}</text>"#, W / 2.0, esc(title));
}

struct Axes {
    x: (f64, f64),
    y: (f64, f64),
}

impl Axes {
    fn px(&self, x: f64) -> f64 {
        LEFT + (x - self.x.0) / (self.x.1 - self.x.0) * (W - LEFT - RIGHT)
    }

    fn py(&self, y: f64) -> f64 {
        H - BOTTOM - (y - self.y.0) / (self.y.1 - self.y.0) * (H - TOP - BOTTOM)
    }

    fn draw(&self, out: &mut String, x_label: &str, y_label: &str) {
        let (x0, x1, y0, y1) = (LEFT, W - RIGHT, TOP, H - BOTTOM);
        let _ = writeln!(out, r##"<rect x="{x0}" y="{y0}" width="{}" height="{}" fill="none" stroke="#333"/>"##, x1 - x0, y1 - y0);
        for t in ticks(self.x.0, self.x.1) {
            let x = self.px(t);
            let _ = writeln!(out, r##"<line x1="{x:.2}" y1="{y1}" x2="{x:.2}" y2="{}" stroke="#333"/>"##, y1 + 5.0);
            let _ = writeln!(out, r#"<text x="{x:.2}" y="{}" text-anchor="middle">{}</text>"#, y1 + 18.0, fmt_g9(t));
        }
        for t in ticks(self.y.0, self.y.1) {
            let y = self.py(t);
            let _ = writeln!(out, r##"<line x1="{}" y1="{y:.2}" x2="{x0}" y2="{y:.2}" stroke="#333"/>"##, x0 - 5.0);
            let _ = writeln!(out, r##"<line x1="{x0}" y1="{y:.2}" x2="{x1}" y2="{y:.2}" stroke="#ddd"/>"##);
            let _ = writeln!(out, r#"<text x="{}" y="{:.2}" text-anchor="end">{}</text>"#, x0 - 8.0, y + 4.0, fmt_g9(t));
        }
        let _ = writeln!(out, r#"<text x="{}" y="{}" text-anchor="middle">{}</text>"#, (x0 + x1) / 2.0, H - 14.0, esc(x_label));
        let _ = writeln!(
            out,
            r#"<text x="18" y="{0}" text-anchor="middle" transform="rotate(-90 18 {0})">{1}</text>"#,
            (y0 + y1) / 2.0,
            esc(y_label)
        );
    }
}

/// Line chart with one polyline per series. `y_range` fixes the vertical
/// axis; otherwise it spans the data.
pub fn line_chart(title: &str, x_label: &str, y_label: &str, series: &[Series], y_range: Option<(f64, f64)>) -> Result<String, PlotError> {
    let pts: Vec<(f64, f64)> = series.iter().flat_map(|s| s.points.iter().copied()).filter(|p| p.0.is_finite() && p.1.is_finite()).collect();
    if pts.is_empty() {
        return Err(PlotError::Empty(format!("no finite points for `{title}`")));
    }
    let fold = |f: fn(&(f64, f64)) -> f64| pts.iter().map(f).fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), v| (lo.min(v), hi.max(v)));
    let (xl, xh) = fold(|p| p.0);
    let (yl, yh) = y_range.unwrap_or_else(|| fold(|p| p.1));
    let axes = Axes { x: span(xl, xh), y: span(yl, yh) };

    let mut out = String::new();
    header(&mut out, title);
    axes.draw(&mut out, x_label, y_label);
    for (i, s) in series.iter().enumerate() {
        let color = PALETTE[i % PALETTE.len()];
        let coords: Vec<String> = s
            .points
            .iter()
            .filter(|p| p.0.is_finite() && p.1.is_finite())
            .map(|&(x, y)| format!("{:.2},{:.2}", axes.px(x), axes.py(y)))
            .collect();
        let _ = writeln!(
            out,
            r#"<polyline class="series" data-name="{}" fill="none" stroke="{color}" stroke-width="2" points="{}"/>"#,
            esc(&s.name),
            coords.join(" ")
        );
        for c in &coords {
            let (x, y) = c.split_once(',').unwrap();
            let _ = writeln!(out, r#"<circle cx="{x}" cy="{y}" r="2.5" fill="{color}"/>"#);
        }
        let ly = TOP + 14.0 + 18.0 * i as f64;
        let lx = W - RIGHT + 12.0;
        let _ = writeln!(out, r#"<line x1="{lx}" y1="{ly}" x2="{}" y2="{ly}" stroke="{color}" stroke-width="2"/>"#, lx + 20.0);
        let _ = writeln!(out, r#"<text x="{}" y="{}">{}</text>"#, lx + 26.0, ly + 4.0, esc(&s.name));
    }
    out.push_str("</svg>\n");
    Ok(out)
}

/// Blue (0) through pale yellow to red (1).
pub fn heat_color(v: f64) -> String {
    const STOPS: [(f64, [f64; 3]); 5] = [
        (0.0, [49.0, 54.0, 149.0]),
        (0.25, [116.0, 173.0, 209.0]),
        (0.5, [255.0, 255.0, 191.0]),
        (0.75, [244.0, 109.0, 67.0]),
        (1.0, [165.0, 0.0, 38.0]),
    ];
    let v = if v.is_finite() { v.clamp(0.0, 1.0) } else { 0.0 };
    let k = STOPS.windows(2).position(|w| v <= w[1].0).unwrap_or(3);
    let ((a, ca), (b, cb)) = (STOPS[k], STOPS[k + 1]);
    let t = (v - a) / (b - a);
    let c: Vec<u8> = (0..3).map(|i| (ca[i] + t * (cb[i] - ca[i])).round() as u8).collect();
    format!("#{:02x}{:02x}{:02x}", c[0], c[1], c[2])
}

/// Heatmap of `values[row][col]` in `[0, 1]` with rows along the vertical
/// axis (first row at the bottom) and a colorbar. Missing cells are grey.
pub fn heatmap(
    title: &str,
    x_label: &str,
    y_label: &str,
    cols: &[f64],
    rows: &[f64],
    values: &[Vec<Option<f64>>],
) -> Result<String, PlotError> {
    if cols.is_empty() || rows.is_empty() {
        return Err(PlotError::Empty(format!("heatmap `{title}` has no cells")));
    }
    let (x0, x1, y0, y1) = (LEFT, W - RIGHT, TOP, H - BOTTOM);
    let cw = (x1 - x0) / cols.len() as f64;
    let ch = (y1 - y0) / rows.len() as f64;
    let mut out = String::new();
    header(&mut out, title);
    for (r, row) in values.iter().enumerate() {
        for (c, v) in row.iter().enumerate() {
            let fill = v.map(heat_color).unwrap_or_else(|| "#bbbbbb".into());
            let _ = writeln!(
                out,
                r#"<rect class="cell" data-row="{}" data-col="{}" data-value="{}" x="{:.2}" y="{:.2}" width="{:.2}" height="{:.2}" fill="{fill}"/>"#,
                fmt_g9(rows[r]),
                fmt_g9(cols[c]),
                v.map(fmt_g9).unwrap_or_default(),
                x0 + c as f64 * cw,
                y1 - (r + 1) as f64 * ch,
                cw + 0.05,
                ch + 0.05
            );
        }
    }
    let _ = writeln!(out, r##"<rect x="{x0}" y="{y0}" width="{}" height="{}" fill="none" stroke="#333"/>"##, x1 - x0, y1 - y0);
    let label_every = |n: usize| n.div_ceil(7).max(1);
    for (c, v) in cols.iter().enumerate().step_by(label_every(cols.len())) {
        let x = x0 + (c as f64 + 0.5) * cw;
        let _ = writeln!(out, r#"<text x="{x:.2}" y="{}" text-anchor="middle">{}</text>"#, y1 + 18.0, fmt_g9(*v));
    }
    for (r, v) in rows.iter().enumerate().step_by(label_every(rows.len())) {
        let y = y1 - (r as f64 + 0.5) * ch;
        let _ = writeln!(out, r#"<text x="{}" y="{:.2}" text-anchor="end">{}</text>"#, x0 - 8.0, y + 4.0, fmt_g9(*v));
    }
    let _ = writeln!(out, r#"<text x="{}" y="{}" text-anchor="middle">{}</text>"#, (x0 + x1) / 2.0, H - 14.0, esc(x_label));
    let _ = writeln!(
        out,
        r#"<text x="18" y="{0}" text-anchor="middle" transform="rotate(-90 18 {0})">{1}</text>"#,
        (y0 + y1) / 2.0,
        esc(y_label)
    );

    // Colorbar.
    let (bx, bw, steps) = (W - RIGHT + 30.0, 18.0, 50);
    let _ = writeln!(out, r#"<g class="colorbar">"#);
    for i in 0..steps {
        let v = (i as f64 + 0.5) / steps as f64;
        let h = (y1 - y0) / steps as f64;
        let y = y1 - (i + 1) as f64 * h;
        let _ = writeln!(out, r#"<rect x="{bx}" y="{y:.2}" width="{bw}" height="{:.2}" fill="{}"/>"#, h + 0.05, heat_color(v));
    }
    let _ = writeln!(out, r##"<rect x="{bx}" y="{y0}" width="{bw}" height="{}" fill="none" stroke="#333"/>"##, y1 - y0);
    for t in [0.0, 0.25, 0.5, 0.75, 1.0] {
        let y = y1 - t * (y1 - y0);
        let _ = writeln!(out, r#"<text x="{}" y="{:.2}">{}</text>"#, bx + bw + 6.0, y + 4.0, fmt_g9(t));
    }
    let _ = writeln!(out, "</g>");
    out.push_str("</svg>\n");
    Ok(out)
}

fn denoiser_series(cells: &[CellResult], x: fn(&CellResult) -> f64) -> Vec<Series> {
    let mut out: Vec<Series> = Vec::new();
    for d in DenoiserKind::ALL {
        let mut pts: Vec<(f64, f64)> = cells.iter().filter(|c| c.denoiser == d).map(|c| (x(c), c.success_rate())).collect();
        if pts.is_empty() {
            continue;
        }
        pts.sort_by(|a, b| a.0.total_cmp(&b.0));
        out.push(Series { name: d.to_string(), points: pts });
    }
    out
}

fn distinct_sorted(values: impl Iterator<Item = f64>) -> Vec<f64> {
    let mut v: Vec<f64> = values.collect();
    v.sort_by(f64::total_cmp);
    v.dedup_by(|a, b| fmt_g9(*a) == fmt_g9(*b));
    v
}

/// Charts for a sweep result as `(file name, svg)` pairs.
pub fn render_sweep(cells: &[CellResult], kind: SweepKind) -> Result<Vec<(String, String)>, PlotError> {
    if cells.is_empty() {
        return Err(PlotError::Empty("results file has no rows".into()));
    }
    match kind {
        SweepKind::Unbiased => {
            let s = denoiser_series(cells, |c| c.sigma);
            Ok(vec![("unbiased.svg".into(), line_chart("Success rate against unbiased noise", "sigma", "success rate", &s, Some((0.0, 1.0)))?)])
        }
        SweepKind::BiasOnly => {
            let s = denoiser_series(cells, |c| c.mu);
            Ok(vec![("bias_only.svg".into(), line_chart("Success rate against bias", "mu", "success rate", &s, Some((0.0, 1.0)))?)])
        }
        SweepKind::Biased => {
            let mut out = Vec::new();
            for d in DenoiserKind::ALL {
                let sub: Vec<&CellResult> = cells.iter().filter(|c| c.denoiser == d).collect();
                if sub.is_empty() {
                    continue;
                }
                let sigmas = distinct_sorted(sub.iter().map(|c| c.sigma));
                let mus = distinct_sorted(sub.iter().map(|c| c.mu));
                let idx = |v: &[f64], x: f64| v.iter().position(|&y| fmt_g9(y) == fmt_g9(x)).unwrap();
                let mut grid = vec![vec![None; sigmas.len()]; mus.len()];
                for c in sub {
                    grid[idx(&mus, c.mu)][idx(&sigmas, c.sigma)] = Some(c.success_rate());
                }
                let title = format!("Success rate against biased noise ({d})");
                out.push((format!("biased_{d}.svg"), heatmap(&title, "sigma", "mu", &sigmas, &mus, &grid)?));
            }
            Ok(out)
        }
    }
}

#[derive(Debug, Deserialize)]
struct TrainRow {
    step: usize,
    mean100_return: f64,
    mean100_len: f64,
}

/// `(step, mean100_return, mean100_len)` rows of a training log CSV.
pub fn read_train_log(path: &Path) -> Result<Vec<(usize, f64, f64)>, PlotError> {
    let bad = |message: String| PlotError::TrainLog { path: path.display().to_string(), message };
    let file = std::fs::File::open(path).map_err(|source| PlotError::Io { path: path.display().to_string(), source })?;
    let mut rdr = csv::Reader::from_reader(file);
    let header = rdr.headers().map_err(|e| bad(e.to_string()))?.iter().collect::<Vec<_>>().join(",");
    if header != navlab_core::ppo::TRAINLOG_HEADER {
        return Err(bad(format!("unexpected header `{header}`")));
    }
    rdr.deserialize::<TrainRow>()
        .enumerate()
        .map(|(i, r)| r.map(|r| (r.step, r.mean100_return, r.mean100_len)).map_err(|e| bad(format!("row {}: {e}", i + 1))))
        .collect()
}

/// Mean-reward and episode-length curves, one series per named log.
pub fn render_training(logs: &[(String, Vec<(usize, f64, f64)>)]) -> Result<Vec<(String, String)>, PlotError> {
    if logs.iter().all(|(_, rows)| rows.is_empty()) {
        return Err(PlotError::Empty("training logs have no episodes".into()));
    }
    let series = |f: fn(&(usize, f64, f64)) -> f64| -> Vec<Series> {
        logs.iter().map(|(name, rows)| Series { name: name.clone(), points: rows.iter().map(|r| (r.0 as f64, f(r))).collect() }).collect()
    };
    Ok(vec![
        ("training_reward.svg".into(), line_chart("Mean reward (last 100 episodes)", "timestep", "mean return", &series(|r| r.1), None)?),
        ("training_length.svg".into(), line_chart("Mean episode length (last 100 episodes)", "timestep", "steps", &series(|r| r.2), None)?),
    ])
}

/// Extract `(x, y)` pixel pairs of every `<polyline class="series">`.
pub fn parse_polylines(svg: &str) -> Vec<(String, Vec<(f64, f64)>)> {
    let mut out = Vec::new();
    for line in svg.lines().filter(|l| l.starts_with(r#"<polyline class="series""#)) {
        let attr = |name: &str| {
            let key = format!(r#"{name}=""#);
            let start = line.find(&key).map(|i| i + key.len())?;
            Some(line[start..start + line[start..].find('"')?].to_string())
        };
        let pts = attr("points")
            .unwrap_or_default()
            .split_whitespace()
            .filter_map(|p| {
                let (x, y) = p.split_once(',')?;
                Some((x.parse().ok()?, y.parse().ok()?))
            })
            .collect();
        out.push((attr("data-name").unwrap_or_default(), pts));
    }
    out
}
