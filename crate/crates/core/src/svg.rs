//! Minimal static SVG phase portraits.

use std::fmt::Write as _;

const WIDTH: f64 = 480.0;
const HEIGHT: f64 = 360.0;
const MARGIN: f64 = 48.0;
const COLORS: [&str; 4] = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd"];

/// A polyline drawn in the color of `mode`.
#[derive(Debug, Clone, PartialEq)]
pub struct Curve {
    pub mode: usize,
    pub points: Vec<(f64, f64)>,
}

fn bounds(curves: &[Curve]) -> (f64, f64, f64, f64) {
    let mut b = (f64::INFINITY, f64::NEG_INFINITY, f64::INFINITY, f64::NEG_INFINITY);
    for (x, y) in curves.iter().flat_map(|c| c.points.iter()).filter(|(x, y)| x.is_finite() && y.is_finite()) {
        b = (b.0.min(*x), b.1.max(*x), b.2.min(*y), b.3.max(*y));
    }
    if !b.0.is_finite() {
        return (-1.0, 1.0, -1.0, 1.0);
    }
    let pad = |lo: f64, hi: f64| {
        let d = if hi > lo { 0.05 * (hi - lo) } else { 0.5 * lo.abs().max(1.0) };
        (lo - d, hi + d)
    };
    let (x0, x1) = pad(b.0, b.1);
    let (y0, y1) = pad(b.2, b.3);
    (x0, x1, y0, y1)
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

/// Renders curves on shared axes labelled `x_label` and `y_label`.
pub fn phase_portrait(curves: &[Curve], x_label: &str, y_label: &str) -> String {
    let (x0, x1, y0, y1) = bounds(curves);
    let sx = |x: f64| MARGIN + (x - x0) / (x1 - x0) * (WIDTH - 2.0 * MARGIN);
    let sy = |y: f64| HEIGHT - MARGIN - (y - y0) / (y1 - y0) * (HEIGHT - 2.0 * MARGIN);
    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}">"#
    );
    let _ = writeln!(s, r#"<rect width="100%" height="100%" fill="white"/>"#);
    let _ = writeln!(
        s,
        r#"<rect x="{MARGIN}" y="{MARGIN}" width="{}" height="{}" fill="none" stroke="black"/>"#,
        WIDTH - 2.0 * MARGIN,
        HEIGHT - 2.0 * MARGIN
    );
    for c in curves {
        let pts: Vec<String> = c
            .points
            .iter()
            .filter(|(x, y)| x.is_finite() && y.is_finite())
            .map(|&(x, y)| format!("{:.2},{:.2}", sx(x), sy(y)))
            .collect();
        if pts.is_empty() {
            continue;
        }
        let _ = writeln!(
            s,
            r#"<polyline fill="none" stroke="{}" stroke-width="1" points="{}"/>"#,
            COLORS[c.mode % COLORS.len()],
            pts.join(" ")
        );
    }
    let tick = |v: f64| format!("{v:.3}");
    let _ = writeln!(
        s,
        r#"<text x="{MARGIN}" y="{}" font-size="11">{}</text><text x="{}" y="{}" font-size="11" text-anchor="end">{}</text>"#,
        HEIGHT - MARGIN + 14.0,
        tick(x0),
        WIDTH - MARGIN,
        HEIGHT - MARGIN + 14.0,
        tick(x1)
    );
    let _ = writeln!(
        s,
        r#"<text x="{}" y="{}" font-size="11" text-anchor="end">{}</text><text x="{}" y="{MARGIN}" font-size="11" text-anchor="end">{}</text>"#,
        MARGIN - 4.0,
        HEIGHT - MARGIN,
        tick(y0),
        MARGIN - 4.0,
        tick(y1)
    );
    let _ = writeln!(
        s,
        r#"<text x="{}" y="{}" font-size="13" text-anchor="middle">{}</text>"#,
        WIDTH / 2.0,
        HEIGHT - 12.0,
        escape(x_label)
    );
    let _ = writeln!(
        s,
        r#"<text x="16" y="{}" font-size="13" text-anchor="middle" transform="rotate(-90 16 {})">{}</text>"#,
        HEIGHT / 2.0,
        HEIGHT / 2.0,
        escape(y_label)
    );
    s.push_str("</svg>\n");
    s
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn one_polyline_per_curve() {
        let c = vec![
            Curve { mode: 0, points: vec![(0.0, 0.0), (1.0, 1.0)] },
            Curve { mode: 1, points: vec![(1.0, 1.0), (2.0, 0.0)] },
        ];
        let s = phase_portrait(&c, "x", "x<dot>");
        assert_eq!(s.matches("<polyline").count(), 2);
        assert!(s.starts_with("<svg") && s.ends_with("</svg>\n"));
        assert!(s.contains("x&lt;dot&gt;"));
    }

    #[test]
    fn corners_map_inside_the_frame() {
        let c = vec![Curve { mode: 0, points: vec![(0.0, 0.0), (10.0, 5.0)] }];
        let s = phase_portrait(&c, "a", "b");
        for p in s.split("points=\"").nth(1).unwrap().split('"').next().unwrap().split(' ') {
            let (x, y) = p.split_once(',').unwrap();
            let (x, y): (f64, f64) = (x.parse().unwrap(), y.parse().unwrap());
            assert!(x > MARGIN && x < WIDTH - MARGIN && y > MARGIN && y < HEIGHT - MARGIN);
        }
    }

    #[test]
    fn empty_input_is_still_a_document() {
        assert!(phase_portrait(&[], "a", "b").contains("</svg>"));
    }
}
