//! Minimal SVG rendering of power curves and rejection regions.

use std::fmt::Write;

const W: f64 = 640.0;
const H: f64 = 400.0;
const PAD_L: f64 = 60.0;
const PAD_R: f64 = 20.0;
const PAD_T: f64 = 20.0;
const PAD_B: f64 = 50.0;

struct Frame {
    x0: f64,
    x1: f64,
    y0: f64,
    y1: f64,
}

impl Frame {
    fn x(&self, v: f64) -> f64 {
        PAD_L + (v - self.x0) / (self.x1 - self.x0) * (W - PAD_L - PAD_R)
    }

    fn y(&self, v: f64) -> f64 {
        H - PAD_B - (v - self.y0) / (self.y1 - self.y0) * (H - PAD_T - PAD_B)
    }
}

fn header(out: &mut String) {
    let _ = write!(
        out,
        r#"<svg xmlns="http://www.w3.org/2000/svg" viewBox="0 0 {W} {H}" width="{W}" height="{H}" font-family="sans-serif" font-size="12">"#
    );
    out.push_str(r#"<rect width="100%" height="100%" fill="white"/>"#);
}

fn axes(out: &mut String, f: &Frame, xlabel: &str, ylabel: &str, xticks: &[f64], yticks: &[f64]) {
    let (bx, by) = (f.x(f.x0), f.y(f.y0));
    let _ = write!(
        out,
        r#"<path d="M{bx:.1},{:.1} V{by:.1} H{:.1}" fill="none" stroke="black"/>"#,
        PAD_T,
        W - PAD_R
    );
    for &t in xticks {
        let x = f.x(t);
        let _ = write!(
            out,
            r#"<line x1="{x:.1}" y1="{by:.1}" x2="{x:.1}" y2="{:.1}" stroke="black"/><text x="{x:.1}" y="{:.1}" text-anchor="middle">{}</text>"#,
            by + 5.0,
            by + 18.0,
            tick_label(t)
        );
    }
    for &t in yticks {
        let y = f.y(t);
        let _ = write!(
            out,
            r#"<line x1="{:.1}" y1="{y:.1}" x2="{bx:.1}" y2="{y:.1}" stroke="black"/><text x="{:.1}" y="{:.1}" text-anchor="end">{}</text>"#,
            bx - 5.0,
            bx - 8.0,
            y + 4.0,
            tick_label(t)
        );
    }
    let _ = write!(
        out,
        r#"<text x="{:.1}" y="{:.1}" text-anchor="middle">{}</text>"#,
        (PAD_L + W - PAD_R) / 2.0,
        H - 10.0,
        escape(xlabel)
    );
    let _ = write!(
        out,
        r#"<text transform="translate(15,{:.1}) rotate(-90)" text-anchor="middle">{}</text>"#,
        (PAD_T + H - PAD_B) / 2.0,
        escape(ylabel)
    );
}

fn tick_label(v: f64) -> String {
    let s = format!("{v:.3}");
    let s = s.trim_end_matches('0').trim_end_matches('.');
    if s == "-0" {
        "0".into()
    } else {
        s.into()
    }
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

/// Evenly spaced "nice" ticks covering `[lo, hi]`.
fn ticks(lo: f64, hi: f64, count: usize) -> Vec<f64> {
    let raw = (hi - lo) / count.max(1) as f64;
    let mag = 10f64.powf(raw.log10().floor());
    let step = [1.0, 2.0, 2.5, 5.0, 10.0]
        .iter()
        .map(|k| k * mag)
        .find(|s| *s >= raw)
        .unwrap_or(10.0 * mag);
    let start = (lo / step).ceil() as i64;
    let end = (hi / step).floor() as i64;
    let units = (step / mag).round();
    // Dividing by an exact power of ten keeps labels like 0.6 exact.
    let to_value = |k: i64| {
        if mag < 1.0 {
            k as f64 * units / (1.0 / mag).round()
        } else {
            k as f64 * units * mag
        }
    };
    (start..=end).map(to_value).collect()
}

/// Step plot of `(n, power)` pairs, with an optional dashed target line.
pub fn ecdf_svg(steps: &[(f64, f64)], target: Option<f64>, title: &str) -> String {
    let x_max = steps.last().map_or(10.0, |s| s.0).max(3.0);
    let x0 = steps.first().map_or(2.0, |s| s.0).min(2.0);
    let f = Frame {
        x0,
        x1: x_max * 1.05,
        y0: 0.0,
        y1: 1.0,
    };
    let mut out = String::new();
    header(&mut out);
    axes(
        &mut out,
        &f,
        "sample size n",
        "power",
        &ticks(f.x0, f.x1, 8),
        &[0.0, 0.2, 0.4, 0.6, 0.8, 1.0],
    );
    let mut d = format!("M{:.2},{:.2}", f.x(x0), f.y(0.0));
    let mut prev = 0.0;
    for &(n, p) in steps {
        let _ = write!(d, " H{:.2}", f.x(n));
        if p != prev {
            let _ = write!(d, " V{:.2}", f.y(p));
        }
        prev = p;
    }
    let _ = write!(d, " H{:.2}", f.x(f.x1));
    let _ = write!(
        out,
        r#"<path d="{d}" fill="none" stroke="steelblue" stroke-width="1.5"/>"#
    );
    if let Some(t) = target {
        let _ = write!(
            out,
            r#"<line x1="{:.1}" y1="{y:.1}" x2="{:.1}" y2="{y:.1}" stroke="gray" stroke-dasharray="4 3"/>"#,
            f.x(f.x0),
            f.x(f.x1),
            y = f.y(t)
        );
    }
    let _ = write!(
        out,
        r#"<text x="{:.1}" y="{:.1}" text-anchor="middle">{}</text></svg>"#,
        (PAD_L + W - PAD_R) / 2.0,
        PAD_T + 2.0,
        escape(title)
    );
    out
}

/// Scatter of `(d_bar, se)` pairs over the rejection triangle with apex
/// height `apex_se`; points are drawn dark inside the region.
pub fn rejection_svg(
    points: &[(f64, f64, bool)],
    delta_lower: f64,
    delta_upper: f64,
    apex_se: f64,
) -> String {
    let span = delta_upper - delta_lower;
    let mut x0 = delta_lower - 0.25 * span;
    let mut x1 = delta_upper + 0.25 * span;
    let mut y1 = apex_se * 1.6;
    for &(d, se, _) in points {
        x0 = x0.min(d);
        x1 = x1.max(d);
        y1 = y1.max(se);
    }
    let f = Frame { x0, x1, y0: 0.0, y1 };
    let mut out = String::new();
    header(&mut out);
    axes(
        &mut out,
        &f,
        "mean difference",
        "standard error",
        &ticks(x0, x1, 8),
        &ticks(0.0, y1, 5),
    );
    let mid = 0.5 * (delta_lower + delta_upper);
    let _ = write!(
        out,
        r#"<polygon points="{:.2},{:.2} {:.2},{:.2} {:.2},{:.2}" fill="lightsteelblue" fill-opacity="0.5" stroke="steelblue"/>"#,
        f.x(delta_lower),
        f.y(0.0),
        f.x(delta_upper),
        f.y(0.0),
        f.x(mid),
        f.y(apex_se)
    );
    for &(d, se, inside) in points {
        let color = if inside { "#1f3b73" } else { "#d08030" };
        let _ = write!(
            out,
            r#"<circle cx="{:.2}" cy="{:.2}" r="1.8" fill="{color}"/>"#,
            f.x(d),
            f.y(se)
        );
    }
    out.push_str("</svg>");
    out
}
