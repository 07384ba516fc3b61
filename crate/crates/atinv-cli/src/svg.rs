//! Minimal static SVG line chart for sweep outputs: the value curve over the
//! parameter grid with the certified bracket drawn as a band.

use crate::runs::SweepRow;

const W: f64 = 720.0;
const H: f64 = 480.0;
const MARGIN: f64 = 60.0;

pub fn sweep_chart(rows: &[SweepRow]) -> String {
    let pts: Vec<(f64, f64, f64, f64)> = rows
        .iter()
        .filter_map(|r| match (r.value, r.lower, r.upper) {
            (Some(v), Some(lo), Some(hi)) => Some((r.r, v, lo, hi)),
            _ => None,
        })
        .collect();

    let mut svg = String::new();
    svg.push_str(&format!(
        "<svg xmlns=\"http://www.w3.org/2000/svg\" viewBox=\"0 0 {W} {H}\" width=\"{W}\" height=\"{H}\">\n"
    ));
    svg.push_str("<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n");
    if pts.is_empty() {
        svg.push_str("<text x=\"20\" y=\"40\">no data</text>\n</svg>\n");
        return svg;
    }

    let (x_min, x_max) = pts.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), p| {
        (a.min(p.0), b.max(p.0))
    });
    let (y_min, y_max) = pts.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), p| {
        (a.min(p.2), b.max(p.3))
    });
    let x_span = (x_max - x_min).max(1e-12);
    let y_span = (y_max - y_min).max(1e-12);
    let sx = |x: f64| MARGIN + (x - x_min) / x_span * (W - 2.0 * MARGIN);
    let sy = |y: f64| H - MARGIN - (y - y_min) / y_span * (H - 2.0 * MARGIN);

    // Certified band: upper edge forward, lower edge back.
    let mut band = String::from("<polygon fill=\"#c8d8f0\" stroke=\"none\" points=\"");
    for p in &pts {
        band.push_str(&format!("{},{} ", sx(p.0), sy(p.3)));
    }
    for p in pts.iter().rev() {
        band.push_str(&format!("{},{} ", sx(p.0), sy(p.2)));
    }
    band.push_str("\"/>\n");
    svg.push_str(&band);

    let mut line = String::from(
        "<polyline fill=\"none\" stroke=\"#204080\" stroke-width=\"1.5\" points=\"",
    );
    for p in &pts {
        line.push_str(&format!("{},{} ", sx(p.0), sy(p.1)));
    }
    line.push_str("\"/>\n");
    svg.push_str(&line);

    // Axes and corner labels.
    svg.push_str(&format!(
        "<line x1=\"{m}\" y1=\"{b}\" x2=\"{r}\" y2=\"{b}\" stroke=\"black\"/>\n",
        m = MARGIN,
        b = H - MARGIN,
        r = W - MARGIN
    ));
    svg.push_str(&format!(
        "<line x1=\"{m}\" y1=\"{t}\" x2=\"{m}\" y2=\"{b}\" stroke=\"black\"/>\n",
        m = MARGIN,
        t = MARGIN,
        b = H - MARGIN
    ));
    svg.push_str(&format!(
        "<text x=\"{}\" y=\"{}\" font-size=\"12\">r = {x_min}</text>\n",
        MARGIN,
        H - MARGIN / 2.0
    ));
    svg.push_str(&format!(
        "<text x=\"{}\" y=\"{}\" font-size=\"12\" text-anchor=\"end\">r = {x_max}</text>\n",
        W - MARGIN,
        H - MARGIN / 2.0
    ));
    svg.push_str(&format!(
        "<text x=\"{}\" y=\"{}\" font-size=\"12\">{y_max}</text>\n",
        MARGIN / 4.0,
        MARGIN
    ));
    svg.push_str(&format!(
        "<text x=\"{}\" y=\"{}\" font-size=\"12\">{y_min}</text>\n",
        MARGIN / 4.0,
        H - MARGIN
    ));
    svg.push_str("</svg>\n");
    svg
}
