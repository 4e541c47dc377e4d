//! Minimal SVG writers for diagnostic plots.

use std::fmt::Write as _;

const W: f64 = 640.0;
const H: f64 = 420.0;
const MARGIN: f64 = 60.0;
const PALETTE: [&str; 6] = ["#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b"];

fn header(out: &mut String, title: &str) {
    let _ = write!(
        out,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{W}" height="{H}" viewBox="0 0 {W} {H}" font-family="sans-serif" font-size="12">"#
    );
    let _ = write!(out, r#"<rect width="{W}" height="{H}" fill="white"/>"#);
    let _ = write!(out, r#"<text x="{}" y="20" text-anchor="middle" font-size="14">{}</text>"#, W / 2.0, escape(title));
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

fn bounds<'a>(values: impl Iterator<Item = &'a f64>) -> (f64, f64) {
    let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
    for &v in values.filter(|v| v.is_finite()) {
        lo = lo.min(v);
        hi = hi.max(v);
    }
    if !lo.is_finite() {
        return (0.0, 1.0);
    }
    if hi - lo < 1e-300 {
        return (lo - 0.5, hi + 0.5);
    }
    (lo, hi)
}

fn axes(out: &mut String, x_label: &str, y_label: &str, xr: (f64, f64), yr: (f64, f64)) {
    let (x0, y0, x1, y1) = (MARGIN, H - MARGIN, W - MARGIN / 2.0, MARGIN / 1.5);
    let _ = write!(
        out,
        r#"<path d="M{x0} {y1} L{x0} {y0} L{x1} {y0}" stroke="black" fill="none"/>"#
    );
    let _ = write!(
        out,
        r#"<text x="{}" y="{}" text-anchor="middle">{}</text>"#,
        (x0 + x1) / 2.0,
        H - 15.0,
        escape(x_label)
    );
    let _ = write!(
        out,
        r#"<text x="15" y="{}" text-anchor="middle" transform="rotate(-90 15 {})">{}</text>"#,
        (y0 + y1) / 2.0,
        (y0 + y1) / 2.0,
        escape(y_label)
    );
    for (v, x) in [(xr.0, x0), (xr.1, x1)] {
        let _ = write!(out, r#"<text x="{x}" y="{}" text-anchor="middle">{}</text>"#, y0 + 16.0, fmt_tick(v));
    }
    for (v, y) in [(yr.0, y0), (yr.1, y1)] {
        let _ = write!(out, r#"<text x="{}" y="{}" text-anchor="end">{}</text>"#, x0 - 4.0, y + 4.0, fmt_tick(v));
    }
}

fn fmt_tick(v: f64) -> String {
    if v != 0.0 && (v.abs() < 1e-2 || v.abs() >= 1e4) {
        format!("{v:.2e}")
    } else {
        format!("{v:.3}")
    }
}

struct Frame {
    xr: (f64, f64),
    yr: (f64, f64),
}

impl Frame {
    fn x(&self, v: f64) -> f64 {
        MARGIN + (v - self.xr.0) / (self.xr.1 - self.xr.0) * (W - 1.5 * MARGIN)
    }
    fn y(&self, v: f64) -> f64 {
        H - MARGIN - (v - self.yr.0) / (self.yr.1 - self.yr.0) * (H - MARGIN - MARGIN / 1.5)
    }
}

/// Line plot of one or more named `(x, y)` series.
pub fn line_plot(title: &str, x_label: &str, y_label: &str, series: &[(&str, &[f64], &[f64])]) -> String {
    let mut out = String::new();
    header(&mut out, title);
    let xr = bounds(series.iter().flat_map(|s| s.1.iter()));
    let yr = bounds(series.iter().flat_map(|s| s.2.iter()));
    axes(&mut out, x_label, y_label, xr, yr);
    let frame = Frame { xr, yr };
    for (k, (name, xs, ys)) in series.iter().enumerate() {
        let colour = PALETTE[k % PALETTE.len()];
        let mut d = String::new();
        let mut pen_up = true;
        for (x, y) in xs.iter().zip(ys.iter()) {
            if !(x.is_finite() && y.is_finite()) {
                pen_up = true;
                continue;
            }
            let _ = write!(d, "{}{:.2} {:.2} ", if pen_up { "M" } else { "L" }, frame.x(*x), frame.y(*y));
            pen_up = false;
        }
        let _ = write!(out, r#"<path d="{}" stroke="{colour}" fill="none" stroke-width="1.2"/>"#, d.trim_end());
        let _ = write!(
            out,
            r#"<text x="{}" y="{}" fill="{colour}">{}</text>"#,
            W - MARGIN * 2.5,
            MARGIN + 14.0 * k as f64,
            escape(name)
        );
    }
    out.push_str("</svg>\n");
    out
}

fn viridis_like(t: f64) -> String {
    let t = t.clamp(0.0, 1.0);
    let r = (68.0 + t * (253.0 - 68.0)) as u8;
    let g = (1.0 + t * (231.0 - 1.0)) as u8;
    let b = (84.0 + (1.0 - t) * (150.0 - 84.0) * (1.0 - t)) as u8;
    format!("#{r:02x}{g:02x}{b:02x}")
}

/// Heat map over a regular grid, `values[row][col]` with rows along y.
/// Missing cells are drawn grey; `overlay` points are joined in black.
pub fn heat_map(
    title: &str,
    x_label: &str,
    y_label: &str,
    xs: &[f64],
    ys: &[f64],
    values: &[Vec<Option<f64>>],
    overlay: &[(f64, f64)],
) -> String {
    let mut out = String::new();
    header(&mut out, title);
    let half = |v: &[f64]| if v.len() > 1 { 0.5 * (v[1] - v[0]).abs() } else { 0.5 };
    let (hx, hy) = (half(xs), half(ys));
    let xr = bounds(xs.iter()).into_padded(hx);
    let yr = bounds(ys.iter()).into_padded(hy);
    axes(&mut out, x_label, y_label, xr, yr);
    let frame = Frame { xr, yr };
    let vr = bounds(values.iter().flatten().flatten());
    for (row, &y) in values.iter().zip(ys) {
        for (cell, &x) in row.iter().zip(xs) {
            let fill = match cell {
                Some(v) => viridis_like((v - vr.0) / (vr.1 - vr.0)),
                None => "#bbbbbb".to_string(),
            };
            let (px, py) = (frame.x(x - hx), frame.y(y + hy));
            let _ = write!(
                out,
                r#"<rect x="{px:.2}" y="{py:.2}" width="{:.2}" height="{:.2}" fill="{fill}"/>"#,
                frame.x(x + hx) - px,
                frame.y(y - hy) - py
            );
        }
    }
    if !overlay.is_empty() {
        let mut d = String::new();
        for (i, (x, y)) in overlay.iter().enumerate() {
            let _ = write!(d, "{}{:.2} {:.2} ", if i == 0 { "M" } else { "L" }, frame.x(*x), frame.y(*y));
        }
        let _ = write!(out, r#"<path d="{}" stroke="black" stroke-width="2" fill="none"/>"#, d.trim_end());
    }
    out.push_str("</svg>\n");
    out
}

trait Pad {
    fn into_padded(self, h: f64) -> (f64, f64);
}

impl Pad for (f64, f64) {
    fn into_padded(self, h: f64) -> (f64, f64) {
        (self.0 - h, self.1 + h)
    }
}

/// Hinton-style diagram: square area proportional to |r|, green positive,
/// red negative.
pub fn hinton(title: &str, labels: &[String], r: &[Vec<f64>]) -> String {
    let mut out = String::new();
    header(&mut out, title);
    let k = labels.len().max(1) as f64;
    let cell = ((H - 2.0 * MARGIN) / k).min((W - 2.0 * MARGIN) / k);
    let (ox, oy) = (MARGIN + 40.0, MARGIN);
    for (i, row) in r.iter().enumerate() {
        for (j, v) in row.iter().enumerate() {
            let side = cell * 0.9 * v.abs().sqrt();
            let cx = ox + (j as f64 + 0.5) * cell;
            let cy = oy + (i as f64 + 0.5) * cell;
            let colour = if *v >= 0.0 { "#2ca02c" } else { "#d62728" };
            let _ = write!(
                out,
                r#"<rect x="{:.2}" y="{:.2}" width="{side:.2}" height="{side:.2}" fill="{colour}"/>"#,
                cx - side / 2.0,
                cy - side / 2.0
            );
        }
    }
    for (i, l) in labels.iter().enumerate() {
        let _ = write!(
            out,
            r#"<text x="{:.2}" y="{:.2}" text-anchor="end" font-size="10">{}</text>"#,
            ox - 4.0,
            oy + (i as f64 + 0.5) * cell + 3.0,
            escape(l)
        );
        let x = ox + (i as f64 + 0.5) * cell;
        let y = oy + k * cell + 12.0;
        let _ = write!(
            out,
            r#"<text x="{x:.2}" y="{y:.2}" font-size="10" transform="rotate(40 {x:.2} {y:.2})">{}</text>"#,
            escape(l)
        );
    }
    out.push_str("</svg>\n");
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn documents_are_closed_and_escaped() {
        let x = [0.0, 1.0, 2.0];
        let y = [1.0, 0.5, f64::NAN];
        let s = line_plot("a < b", "t", "y", &[("y", &x, &y)]);
        assert!(s.starts_with("<svg") && s.trim_end().ends_with("</svg>"));
        assert!(s.contains("a &lt; b"));
        let h = hinton("r", &["a".into(), "b".into()], &[vec![1.0, -0.5], vec![-0.5, 1.0]]);
        assert_eq!(h.matches("<rect").count(), 5);
        let m = heat_map("m", "f", "P", &x, &[1.0, 2.0], &[vec![Some(1.0), None, Some(2.0)], vec![None; 3]], &[(1.0, 1.0), (2.0, 2.0)]);
        assert!(m.contains("#bbbbbb") && m.contains("stroke=\"black\" stroke-width=\"2\""));
    }
}
