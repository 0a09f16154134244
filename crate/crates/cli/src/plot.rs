//! Minimal SVG line chart: truth and prediction over time.

use std::fmt::Write as _;

const WIDTH: f64 = 800.0;
const HEIGHT: f64 = 400.0;
const MARGIN: f64 = 60.0;

fn polyline(ts: &[f64], ys: &[f64], x: impl Fn(f64) -> f64, y: impl Fn(f64) -> f64) -> String {
    let mut s = String::with_capacity(ts.len() * 16);
    for (t, v) in ts.iter().zip(ys) {
        let _ = write!(s, "{:.3},{:.3} ", x(*t), y(*v));
    }
    s.trim_end().to_string()
}

pub fn svg(ts: &[f64], truth: &[f64], pred: &[f64], title: &str) -> String {
    let (t0, t1) = (ts.first().copied().unwrap_or(0.0), ts.last().copied().unwrap_or(1.0));
    let lo = truth.iter().chain(pred).copied().fold(f64::INFINITY, f64::min);
    let hi = truth.iter().chain(pred).copied().fold(f64::NEG_INFINITY, f64::max);
    let (lo, hi) = if hi > lo { (lo, hi) } else { (lo - 1.0, hi + 1.0) };
    let tspan = if t1 > t0 { t1 - t0 } else { 1.0 };
    let x = |t: f64| MARGIN + (t - t0) / tspan * (WIDTH - 2.0 * MARGIN);
    let y = |v: f64| HEIGHT - MARGIN - (v - lo) / (hi - lo) * (HEIGHT - 2.0 * MARGIN);

    let mut s = String::new();
    let _ = writeln!(s, r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}">"#);
    let _ = writeln!(s, r#"<rect width="100%" height="100%" fill="white"/>"#);
    let _ = writeln!(s, r#"<text x="{}" y="24" text-anchor="middle" font-family="sans-serif" font-size="16">{title}</text>"#, WIDTH / 2.0);
    // axes
    let (xl, xr, yt, yb) = (MARGIN, WIDTH - MARGIN, MARGIN, HEIGHT - MARGIN);
    let _ = writeln!(s, r#"<line id="x-axis" x1="{xl}" y1="{yb}" x2="{xr}" y2="{yb}" stroke="black"/>"#);
    let _ = writeln!(s, r#"<line id="y-axis" x1="{xl}" y1="{yt}" x2="{xl}" y2="{yb}" stroke="black"/>"#);
    let label = r#"font-family="sans-serif" font-size="12""#;
    let _ = writeln!(s, r#"<text x="{xl}" y="{}" text-anchor="middle" {label}>{t0}</text>"#, yb + 18.0);
    let _ = writeln!(s, r#"<text x="{xr}" y="{}" text-anchor="middle" {label}>{t1}</text>"#, yb + 18.0);
    let _ = writeln!(s, r#"<text x="{}" y="{}" text-anchor="middle" {label}>t (s)</text>"#, WIDTH / 2.0, yb + 36.0);
    let _ = writeln!(s, r#"<text x="{}" y="{yb}" text-anchor="end" {label}>{lo:.3}</text>"#, xl - 6.0);
    let _ = writeln!(s, r#"<text x="{}" y="{}" text-anchor="end" {label}>{hi:.3}</text>"#, xl - 6.0, yt + 4.0);
    let _ = writeln!(s, r#"<text x="16" y="{}" transform="rotate(-90 16 {})" text-anchor="middle" {label}>I (A)</text>"#, HEIGHT / 2.0, HEIGHT / 2.0);
    // series
    let _ = writeln!(
        s,
        r#"<polyline id="truth" fill="none" stroke="black" stroke-width="1.5" points="{}"/>"#,
        polyline(ts, truth, x, y)
    );
    let _ = writeln!(
        s,
        r#"<polyline id="prediction" fill="none" stroke="crimson" stroke-width="1.5" stroke-dasharray="6 3" points="{}"/>"#,
        polyline(ts, pred, x, y)
    );
    // legend
    let lx = xr - 150.0;
    let _ = writeln!(s, r#"<g id="legend" {label}>"#);
    let _ = writeln!(s, r#"<line x1="{lx}" y1="{}" x2="{}" y2="{}" stroke="black" stroke-width="1.5"/>"#, yt + 10.0, lx + 24.0, yt + 10.0);
    let _ = writeln!(s, r#"<text x="{}" y="{}">ground truth</text>"#, lx + 30.0, yt + 14.0);
    let _ = writeln!(
        s,
        r#"<line x1="{lx}" y1="{}" x2="{}" y2="{}" stroke="crimson" stroke-width="1.5" stroke-dasharray="6 3"/>"#,
        yt + 28.0,
        lx + 24.0,
        yt + 28.0
    );
    let _ = writeln!(s, r#"<text x="{}" y="{}">prediction</text>"#, lx + 30.0, yt + 32.0);
    s.push_str("</g>\n</svg>\n");
    s
}

pub fn csv(ts: &[f64], truth: &[f64], pred: &[f64]) -> String {
    let mut s = String::from("t,truth,prediction\n");
    for ((t, a), b) in ts.iter().zip(truth).zip(pred) {
        let _ = writeln!(s, "{t},{a},{b}");
    }
    s
}
