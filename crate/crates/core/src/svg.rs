//! Minimal static SVG rendering of scatter plots and histograms.

use std::fmt::Write as _;

use crate::dataset::Histogram;

const WIDTH: f64 = 480.0;
const HEIGHT: f64 = 360.0;
const MARGIN: f64 = 48.0;

struct Frame {
    x0: f64,
    x1: f64,
    y0: f64,
    y1: f64,
}

impl Frame {
    fn new(xs: impl Iterator<Item = f64> + Clone, ys: impl Iterator<Item = f64> + Clone) -> Frame {
        let (x0, x1) = bounds(xs);
        let (y0, y1) = bounds(ys);
        Frame { x0, x1, y0, y1 }
    }

    fn px(&self, x: f64) -> f64 {
        MARGIN + (x - self.x0) / (self.x1 - self.x0) * (WIDTH - 2.0 * MARGIN)
    }

    fn py(&self, y: f64) -> f64 {
        HEIGHT - MARGIN - (y - self.y0) / (self.y1 - self.y0) * (HEIGHT - 2.0 * MARGIN)
    }
}

fn bounds(v: impl Iterator<Item = f64>) -> (f64, f64) {
    let (lo, hi) = v
        .filter(|x| x.is_finite())
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(l, h), x| {
            (l.min(x), h.max(x))
        });
    if !lo.is_finite() {
        (0.0, 1.0)
    } else if hi > lo {
        (lo, hi)
    } else {
        (lo - 0.5, hi + 0.5)
    }
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;")
        .replace('<', "&lt;")
        .replace('>', "&gt;")
}

fn open(title: &str, xlabel: &str, ylabel: &str, f: &Frame) -> String {
    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}" font-family="sans-serif" font-size="11">"#
    );
    let _ = writeln!(s, r#"<rect width="100%" height="100%" fill="white"/>"#);
    let _ = writeln!(
        s,
        r#"<text x="{}" y="20" text-anchor="middle" font-size="13">{}</text>"#,
        WIDTH / 2.0,
        escape(title)
    );
    let _ = writeln!(
        s,
        r#"<rect x="{MARGIN}" y="{MARGIN}" width="{}" height="{}" fill="none" stroke="black"/>"#,
        WIDTH - 2.0 * MARGIN,
        HEIGHT - 2.0 * MARGIN
    );
    let _ = writeln!(
        s,
        r#"<text x="{}" y="{}" text-anchor="middle">{}</text>"#,
        WIDTH / 2.0,
        HEIGHT - 10.0,
        escape(xlabel)
    );
    let _ = writeln!(
        s,
        r#"<text x="14" y="{}" text-anchor="middle" transform="rotate(-90 14 {})">{}</text>"#,
        HEIGHT / 2.0,
        HEIGHT / 2.0,
        escape(ylabel)
    );
    let ticks = [
        (MARGIN, HEIGHT - MARGIN + 14.0, "middle", f.x0),
        (WIDTH - MARGIN, HEIGHT - MARGIN + 14.0, "middle", f.x1),
        (MARGIN - 4.0, HEIGHT - MARGIN, "end", f.y0),
        (MARGIN - 4.0, MARGIN + 4.0, "end", f.y1),
    ];
    for (x, y, anchor, v) in ticks {
        let _ = writeln!(
            s,
            r#"<text x="{x}" y="{y}" text-anchor="{anchor}">{v:.4}</text>"#
        );
    }
    s
}

/// Scatter plot of `(x, y)` points.
pub fn scatter(points: &[(f64, f64)], title: &str, xlabel: &str, ylabel: &str) -> String {
    let f = Frame::new(points.iter().map(|p| p.0), points.iter().map(|p| p.1));
    let mut s = open(title, xlabel, ylabel, &f);
    for &(x, y) in points.iter().filter(|p| p.0.is_finite() && p.1.is_finite()) {
        let _ = writeln!(
            s,
            r#"<circle cx="{:.2}" cy="{:.2}" r="2" fill="steelblue"/>"#,
            f.px(x),
            f.py(y)
        );
    }
    s.push_str("</svg>\n");
    s
}

pub fn histogram(h: &Histogram, title: &str, xlabel: &str) -> String {
    let top = h.counts.iter().copied().max().unwrap_or(0).max(1) as f64;
    let f = Frame {
        x0: h.edges[0],
        x1: h.edges[h.edges.len() - 1],
        y0: 0.0,
        y1: top,
    };
    let mut s = open(title, xlabel, "count", &f);
    for (k, &c) in h.counts.iter().enumerate() {
        let (l, r) = (f.px(h.edges[k]), f.px(h.edges[k + 1]));
        let t = f.py(c as f64);
        let _ = writeln!(
            s,
            r#"<rect x="{l:.2}" y="{t:.2}" width="{:.2}" height="{:.2}" fill="lightgray" stroke="black"/>"#,
            r - l,
            f.py(0.0) - t
        );
    }
    s.push_str("</svg>\n");
    s
}
