//! Minimal SVG line plot of a loss trace.

use std::fmt::Write;

use drwr::FitTrace;

const WIDTH: f64 = 640.0;
const HEIGHT: f64 = 400.0;
const MARGIN: f64 = 50.0;

/// Total and unary loss against step. The y axis is logarithmic when every
/// plotted value is positive.
pub fn loss_plot(trace: &FitTrace) -> String {
    let mut svg = String::new();
    let _ = writeln!(
        svg,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}">"#
    );
    let _ = writeln!(svg, r#"<rect width="100%" height="100%" fill="white"/>"#);
    let recs = &trace.records;
    if recs.is_empty() {
        svg.push_str("</svg>\n");
        return svg;
    }
    let values: Vec<f64> = recs.iter().flat_map(|r| [r.total, r.unary]).collect();
    let log = values.iter().all(|v| *v > 0.0 && v.is_finite());
    let tf = |v: f64| if log { v.log10() } else { v };
    let finite: Vec<f64> = values.iter().map(|&v| tf(v)).filter(|v| v.is_finite()).collect();
    let mut lo = finite.iter().cloned().fold(f64::INFINITY, f64::min);
    let mut hi = finite.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    if !lo.is_finite() {
        (lo, hi) = (0.0, 1.0);
    }
    if hi - lo < 1e-12 {
        hi = lo + 1.0;
    }
    let s0 = recs[0].step as f64;
    let s1 = (recs[recs.len() - 1].step as f64).max(s0 + 1.0);
    let px = |s: f64| MARGIN + (s - s0) / (s1 - s0) * (WIDTH - 2.0 * MARGIN);
    let py = |v: f64| HEIGHT - MARGIN - (tf(v) - lo) / (hi - lo) * (HEIGHT - 2.0 * MARGIN);

    let _ = writeln!(
        svg,
        r#"<path d="M{m} {m} V{b} H{r}" stroke="black" fill="none"/>"#,
        m = MARGIN,
        b = HEIGHT - MARGIN,
        r = WIDTH - MARGIN
    );
    let axis = if log { "log10 loss" } else { "loss" };
    let _ = writeln!(
        svg,
        r#"<text x="{}" y="{}" font-size="12" text-anchor="middle">step</text>"#,
        WIDTH / 2.0,
        HEIGHT - 15.0
    );
    let _ = writeln!(
        svg,
        r#"<text x="15" y="{}" font-size="12" transform="rotate(-90 15 {})" text-anchor="middle">{axis}</text>"#,
        HEIGHT / 2.0,
        HEIGHT / 2.0
    );
    for (label, v) in [(format!("{lo:.3}"), lo), (format!("{hi:.3}"), hi)] {
        let y = HEIGHT - MARGIN - (v - lo) / (hi - lo) * (HEIGHT - 2.0 * MARGIN);
        let _ = writeln!(
            svg,
            r#"<text x="{}" y="{y:.1}" font-size="10" text-anchor="end">{label}</text>"#,
            MARGIN - 4.0
        );
    }
    for (x, label) in [(s0, recs[0].step), (s1, recs[recs.len() - 1].step)] {
        let _ = writeln!(
            svg,
            r#"<text x="{:.1}" y="{}" font-size="10" text-anchor="middle">{label}</text>"#,
            px(x),
            HEIGHT - MARGIN + 14.0
        );
    }
    let series: [(&str, fn(&drwr::fitter::TraceRecord) -> f64); 2] =
        [("steelblue", |r| r.total), ("darkorange", |r| r.unary)];
    for (color, get) in series {
        let pts: Vec<String> = recs
            .iter()
            .filter(|r| tf(get(r)).is_finite())
            .map(|r| format!("{:.2},{:.2}", px(r.step as f64), py(get(r))))
            .collect();
        let _ = writeln!(
            svg,
            r#"<polyline points="{}" stroke="{color}" fill="none" stroke-width="1.5"/>"#,
            pts.join(" ")
        );
    }
    let _ = writeln!(
        svg,
        r#"<text x="{}" y="{}" font-size="11" fill="steelblue">total</text>"#,
        WIDTH - MARGIN - 80.0,
        MARGIN - 10.0
    );
    let _ = writeln!(
        svg,
        r#"<text x="{}" y="{}" font-size="11" fill="darkorange">unary</text>"#,
        WIDTH - MARGIN - 30.0,
        MARGIN - 10.0
    );
    svg.push_str("</svg>\n");
    svg
}
