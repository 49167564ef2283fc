//! Static SVG figures for two-asset runs.

use std::fmt::Write;

use conic_duality_core::{ExtReal, MarketModel, UpperImage};

const W: f64 = 480.0;
const H: f64 = 480.0;
const PAD: f64 = 40.0;

struct Frame {
    x0: f64,
    x1: f64,
    y0: f64,
    y1: f64,
}

impl Frame {
    fn px(&self, x: f64) -> f64 {
        PAD + (x - self.x0) / (self.x1 - self.x0) * (W - 2.0 * PAD)
    }

    fn py(&self, y: f64) -> f64 {
        H - PAD - (y - self.y0) / (self.y1 - self.y0) * (H - 2.0 * PAD)
    }
}

fn bounds(points: &[Vec<f64>]) -> Frame {
    let (mut x0, mut x1, mut y0, mut y1) = (
        f64::INFINITY,
        f64::NEG_INFINITY,
        f64::INFINITY,
        f64::NEG_INFINITY,
    );
    for p in points {
        x0 = x0.min(p[0]);
        x1 = x1.max(p[0]);
        y0 = y0.min(p[1]);
        y1 = y1.max(p[1]);
    }
    if !x0.is_finite() {
        return Frame {
            x0: 0.0,
            x1: 1.0,
            y0: 0.0,
            y1: 1.0,
        };
    }
    let span = (x1 - x0).max(y1 - y0).max(1e-6);
    // Room to show the recession directions of the upper image.
    Frame {
        x0: x0 - 0.1 * span,
        x1: x0 + 1.2 * span,
        y0: y0 - 0.1 * span,
        y1: y0 + 1.2 * span,
    }
}

/// Inner points, their staircase hull, and the outer supporting lines.
pub fn upper_image(img: &UpperImage) -> String {
    let f = bounds(&img.inner);
    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{W}" height="{H}" viewBox="0 0 {W} {H}">"#
    );
    let _ = writeln!(
        s,
        r#"<defs><clipPath id="plot"><rect x="{PAD}" y="{PAD}" width="{}" height="{}"/></clipPath></defs>"#,
        W - 2.0 * PAD,
        H - 2.0 * PAD
    );
    let _ = writeln!(s, r#"<rect width="{W}" height="{H}" fill="white"/>"#);
    let _ = writeln!(s, r#"<g clip-path="url(#plot)">"#);

    let mut pts: Vec<&Vec<f64>> = img.inner.iter().collect();
    pts.sort_by(|a, b| a[0].total_cmp(&b[0]));
    if let (Some(first), Some(last)) = (pts.first(), pts.last()) {
        let mut poly = format!("{:.2},{:.2}", f.px(first[0]), f.py(f.y1 + 1.0));
        for p in &pts {
            let _ = write!(poly, " {:.2},{:.2}", f.px(p[0]), f.py(p[1]));
        }
        let _ = write!(
            poly,
            " {:.2},{:.2} {:.2},{:.2}",
            f.px(f.x1 + 1.0),
            f.py(last[1]),
            f.px(f.x1 + 1.0),
            f.py(f.y1 + 1.0)
        );
        let _ = writeln!(
            s,
            r##"<polygon points="{poly}" fill="#cfe3f5" stroke="none"/>"##
        );
    }

    for h in &img.outer {
        let ExtReal::Finite(sup) = h.support else {
            continue;
        };
        let n = h.normal.as_slice();
        let (a, b) = if n[1].abs() > n[0].abs() {
            let y = |x: f64| (sup - n[0] * x) / n[1];
            ((f.x0, y(f.x0)), (f.x1, y(f.x1)))
        } else {
            let x = |y: f64| (sup - n[1] * y) / n[0];
            ((x(f.y0), f.y0), (x(f.y1), f.y1))
        };
        let _ = writeln!(
            s,
            r##"<line x1="{:.2}" y1="{:.2}" x2="{:.2}" y2="{:.2}" stroke="#d0542c" stroke-width="0.6"/>"##,
            f.px(a.0),
            f.py(a.1),
            f.px(b.0),
            f.py(b.1)
        );
    }
    for p in &pts {
        let _ = writeln!(
            s,
            r##"<circle cx="{:.2}" cy="{:.2}" r="2" fill="#1f4e79"/>"##,
            f.px(p[0]),
            f.py(p[1])
        );
    }
    let _ = writeln!(s, "</g>");
    let _ = writeln!(
        s,
        r##"<rect x="{PAD}" y="{PAD}" width="{}" height="{}" fill="none" stroke="#444"/>"##,
        W - 2.0 * PAD,
        H - 2.0 * PAD
    );
    let _ = writeln!(
        s,
        r#"<text x="{PAD}" y="{}" font-family="sans-serif" font-size="11">x: [{:.4}, {:.4}]  y: [{:.4}, {:.4}]</text>"#,
        H - 12.0,
        f.x0,
        f.x1,
        f.y0,
        f.y1
    );
    s.push_str("</svg>\n");
    s
}

const CELL: f64 = 90.0;
const COLS: usize = 9;

/// One panel per node: the solvency cone shaded, its polar as dashed rays.
pub fn cones(market: &MarketModel) -> String {
    let n = market.tree().len();
    let rows = n.div_ceil(COLS);
    let (w, h) = (CELL * COLS.min(n) as f64, CELL * rows as f64);
    let r = 0.4 * CELL;
    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{w}" height="{h}" viewBox="0 0 {w} {h}">"#
    );
    let _ = writeln!(s, r#"<rect width="{w}" height="{h}" fill="white"/>"#);
    for node in 0..n {
        let cx = CELL * (node % COLS) as f64 + CELL / 2.0;
        let cy = CELL * (node / COLS) as f64 + CELL / 2.0;
        let _ = writeln!(s, r#"<g transform="translate({cx},{cy})">"#);
        let _ = writeln!(
            s,
            r##"<line x1="{}" y1="0" x2="{r}" y2="0" stroke="#bbb"/><line x1="0" y1="{r}" x2="0" y2="{}" stroke="#bbb"/>"##,
            -r, -r
        );

        let mut angles: Vec<f64> = market
            .cone(node)
            .generators()
            .iter()
            .map(|g| g[1].atan2(g[0]))
            .collect();
        angles.sort_by(f64::total_cmp);
        if let (Some(&lo), Some(&hi)) = (angles.first(), angles.last()) {
            let mut poly = String::from("0,0");
            let steps = 24;
            for k in 0..=steps {
                let t = lo + (hi - lo) * k as f64 / steps as f64;
                let _ = write!(poly, " {:.2},{:.2}", r * t.cos(), -r * t.sin());
            }
            let _ = writeln!(
                s,
                r##"<polygon points="{poly}" fill="#cfe3f5" stroke="#1f4e79" stroke-width="0.8"/>"##
            );
        }
        for g in market.polar(node).generators() {
            let norm = g[0].hypot(g[1]);
            let _ = writeln!(
                s,
                r##"<line x1="0" y1="0" x2="{:.2}" y2="{:.2}" stroke="#d0542c" stroke-dasharray="3,2"/>"##,
                r * g[0] / norm,
                -r * g[1] / norm
            );
        }
        let _ = writeln!(
            s,
            r#"<text x="{}" y="{}" font-family="sans-serif" font-size="9">{node}</text>"#,
            -CELL / 2.0 + 3.0,
            -CELL / 2.0 + 10.0
        );
        s.push_str("</g>\n");
    }
    s.push_str("</svg>\n");
    s
}
