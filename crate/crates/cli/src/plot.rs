//! Static SVG plots: log-log convergence curves and signed heatmaps.

use std::fmt::Write;

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum PlotError {
    EmptySeries,
}

impl std::fmt::Display for PlotError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            PlotError::EmptySeries => write!(f, "EmptySeries: nothing to plot"),
        }
    }
}

impl std::error::Error for PlotError {}

#[derive(Debug, Clone)]
pub struct Series {
    pub label: String,
    /// (x, y) pairs, both positive for log-log plots.
    pub points: Vec<[f64; 2]>,
}

#[derive(Debug, Clone)]
pub enum Plot {
    LogLog { series: Vec<Series>, x_label: String, y_label: String },
    /// Row-major `ny × nx` values, first row at the bottom.
    Heatmap { title: String, nx: usize, ny: usize, values: Vec<f64> },
}

const W: f64 = 640.0;
const H: f64 = 480.0;
const PAD: f64 = 70.0;
const COLORS: [&str; 4] = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd"];

/// Least-squares slope of log y on log x (None for fewer than two distinct x).
pub fn loglog_slope(points: &[[f64; 2]]) -> Option<f64> {
    if points.len() < 2 {
        return None;
    }
    let n = points.len() as f64;
    let lx: Vec<f64> = points.iter().map(|p| p[0].ln()).collect();
    let ly: Vec<f64> = points.iter().map(|p| p[1].ln()).collect();
    let mx = lx.iter().sum::<f64>() / n;
    let my = ly.iter().sum::<f64>() / n;
    let sxx: f64 = lx.iter().map(|v| (v - mx).powi(2)).sum();
    if sxx == 0.0 {
        return None;
    }
    Some(lx.iter().zip(&ly).map(|(a, b)| (a - mx) * (b - my)).sum::<f64>() / sxx)
}

pub fn export_plot(plot: &Plot) -> Result<String, PlotError> {
    match plot {
        Plot::LogLog { series, x_label, y_label } => loglog(series, x_label, y_label),
        Plot::Heatmap { title, nx, ny, values } => heatmap(title, *nx, *ny, values),
    }
}

fn header(out: &mut String) {
    let _ = writeln!(
        out,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{W}" height="{H}" viewBox="0 0 {W} {H}" font-family="sans-serif" font-size="12">"#
    );
    let _ = writeln!(out, r#"<rect width="{W}" height="{H}" fill="white"/>"#);
}

fn loglog(series: &[Series], x_label: &str, y_label: &str) -> Result<String, PlotError> {
    let pts: Vec<[f64; 2]> = series
        .iter()
        .flat_map(|s| s.points.iter().copied())
        .filter(|p| p[0] > 0.0 && p[1] > 0.0 && p[0].is_finite() && p[1].is_finite())
        .collect();
    if pts.is_empty() {
        return Err(PlotError::EmptySeries);
    }
    let range = |k: usize| {
        let lo = pts.iter().map(|p| p[k].log10()).fold(f64::INFINITY, f64::min);
        let hi = pts.iter().map(|p| p[k].log10()).fold(f64::NEG_INFINITY, f64::max);
        if hi - lo < 1e-9 {
            (lo - 0.5, hi + 0.5)
        } else {
            let m = 0.05 * (hi - lo);
            (lo - m, hi + m)
        }
    };
    let (x0, x1) = range(0);
    let (y0, y1) = range(1);
    let px = |x: f64| PAD + (x.log10() - x0) / (x1 - x0) * (W - 2.0 * PAD);
    let py = |y: f64| H - PAD - (y.log10() - y0) / (y1 - y0) * (H - 2.0 * PAD);

    let mut out = String::new();
    header(&mut out);
    let _ = writeln!(
        out,
        r#"<rect x="{PAD}" y="{PAD}" width="{}" height="{}" fill="none" stroke="black"/>"#,
        W - 2.0 * PAD,
        H - 2.0 * PAD
    );
    for (lo, hi, horizontal) in [(x0, x1, true), (y0, y1, false)] {
        for d in (lo.ceil() as i32)..=(hi.floor() as i32) {
            let v = 10f64.powi(d);
            if horizontal {
                let x = px(v);
                let _ = writeln!(out, r#"<line x1="{x:.2}" y1="{}" x2="{x:.2}" y2="{}" stroke="black"/>"#, H - PAD, H - PAD + 5.0);
                let _ = writeln!(out, r#"<text x="{x:.2}" y="{}" text-anchor="middle">1e{d}</text>"#, H - PAD + 20.0);
            } else {
                let y = py(v);
                let _ = writeln!(out, r#"<line x1="{}" y1="{y:.2}" x2="{PAD}" y2="{y:.2}" stroke="black"/>"#, PAD - 5.0);
                let _ = writeln!(out, r#"<text x="{}" y="{:.2}" text-anchor="end">1e{d}</text>"#, PAD - 8.0, y + 4.0);
            }
        }
    }
    let _ = writeln!(out, r#"<text x="{}" y="{}" text-anchor="middle">{}</text>"#, W / 2.0, H - 20.0, esc(x_label));
    let _ = writeln!(
        out,
        r#"<text x="20" y="{}" text-anchor="middle" transform="rotate(-90 20 {})">{}</text>"#,
        H / 2.0,
        H / 2.0,
        esc(y_label)
    );
    for (k, s) in series.iter().enumerate() {
        let c = COLORS[k % COLORS.len()];
        let good: Vec<[f64; 2]> = s.points.iter().copied().filter(|p| p[0] > 0.0 && p[1] > 0.0).collect();
        for p in &good {
            let _ = writeln!(out, r#"<circle cx="{:.2}" cy="{:.2}" r="4" fill="{c}"/>"#, px(p[0]), py(p[1]));
        }
        let mut label = esc(&s.label);
        if let Some(slope) = loglog_slope(&good) {
            let lx: Vec<f64> = good.iter().map(|p| p[0].ln()).collect();
            let ly: Vec<f64> = good.iter().map(|p| p[1].ln()).collect();
            let n = lx.len() as f64;
            let (mx, my) = (lx.iter().sum::<f64>() / n, ly.iter().sum::<f64>() / n);
            let xa = good.iter().map(|p| p[0]).fold(f64::INFINITY, f64::min);
            let xb = good.iter().map(|p| p[0]).fold(0.0, f64::max);
            let fy = |x: f64| (my + slope * (x.ln() - mx)).exp();
            let _ = writeln!(
                out,
                r#"<line x1="{:.2}" y1="{:.2}" x2="{:.2}" y2="{:.2}" stroke="{c}" stroke-dasharray="6 4"/>"#,
                px(xa),
                py(fy(xa)),
                px(xb),
                py(fy(xb))
            );
            label = format!("{label} (slope = {slope:.3})");
        }
        let _ = writeln!(out, r#"<text x="{}" y="{}" fill="{c}">{label}</text>"#, PAD + 10.0, PAD + 18.0 * (k as f64 + 1.0));
    }
    out.push_str("</svg>\n");
    Ok(out)
}

/// Blue for negative, red for positive, white at zero; the scale is ±max|v|.
fn diverging(v: f64, vmax: f64) -> String {
    let s = if vmax > 0.0 { (v / vmax).clamp(-1.0, 1.0) } else { 0.0 };
    let fade = (255.0 * (1.0 - s.abs())).round() as u8;
    if s >= 0.0 {
        format!("#ff{fade:02x}{fade:02x}")
    } else {
        format!("#{fade:02x}{fade:02x}ff")
    }
}

fn heatmap(title: &str, nx: usize, ny: usize, values: &[f64]) -> Result<String, PlotError> {
    if nx == 0 || ny == 0 || values.len() != nx * ny {
        return Err(PlotError::EmptySeries);
    }
    let vmax = values.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let side = (H - 2.0 * PAD).min(W - 3.0 * PAD);
    let (cw, ch) = (side / nx as f64, side / ny as f64);
    let mut out = String::new();
    header(&mut out);
    let _ = writeln!(out, r#"<text x="{}" y="30" text-anchor="middle">{}</text>"#, PAD + side / 2.0, esc(title));
    for j in 0..ny {
        for i in 0..nx {
            let v = values[j * nx + i];
            let _ = writeln!(
                out,
                r#"<rect x="{:.3}" y="{:.3}" width="{:.3}" height="{:.3}" fill="{}"/>"#,
                PAD + i as f64 * cw,
                PAD + (ny - 1 - j) as f64 * ch,
                cw + 0.05,
                ch + 0.05,
                diverging(v, vmax)
            );
        }
    }
    // Colour bar, symmetric about zero.
    let bx = PAD + side + 30.0;
    for k in 0..50 {
        let v = vmax * (1.0 - 2.0 * k as f64 / 49.0);
        let _ = writeln!(
            out,
            r#"<rect x="{bx}" y="{:.3}" width="20" height="{:.3}" fill="{}"/>"#,
            PAD + k as f64 * side / 50.0,
            side / 50.0 + 0.05,
            diverging(v, vmax)
        );
    }
    let _ = writeln!(out, r#"<text x="{}" y="{}">{:+.3e}</text>"#, bx + 25.0, PAD + 10.0, vmax);
    let _ = writeln!(out, r#"<text x="{}" y="{}">0</text>"#, bx + 25.0, PAD + side / 2.0 + 4.0);
    let _ = writeln!(out, r#"<text x="{}" y="{}">{:+.3e}</text>"#, bx + 25.0, PAD + side, -vmax);
    out.push_str("</svg>\n");
    Ok(out)
}

fn esc(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}
