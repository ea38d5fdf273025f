//! Static SVG charts: training curves and planar trajectories.

use std::fmt::Write as _;

use crate::world::{Rect, RegionMap};

const W: f64 = 640.0;
const H: f64 = 420.0;
const MARGIN: f64 = 56.0;
const COLORS: [&str; 8] = [
    "#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b", "#e377c2", "#17becf",
];

pub struct Series {
    pub label: String,
    pub points: Vec<(f64, f64)>,
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

/// Maps data ranges onto the plot area; y grows upward.
struct Frame {
    x: (f64, f64),
    y: (f64, f64),
}

impl Frame {
    fn fit<'a>(points: impl Iterator<Item = &'a (f64, f64)>) -> Frame {
        let (mut x, mut y) = ((f64::INFINITY, f64::NEG_INFINITY), (f64::INFINITY, f64::NEG_INFINITY));
        for &(px, py) in points.filter(|p| p.0.is_finite() && p.1.is_finite()) {
            x = (x.0.min(px), x.1.max(px));
            y = (y.0.min(py), y.1.max(py));
        }
        let pad = |r: (f64, f64)| {
            if !r.0.is_finite() {
                (0.0, 1.0)
            } else if r.1 - r.0 < 1e-12 {
                (r.0 - 0.5, r.1 + 0.5)
            } else {
                r
            }
        };
        Frame { x: pad(x), y: pad(y) }
    }

    fn px(&self, x: f64) -> f64 {
        MARGIN + (x - self.x.0) / (self.x.1 - self.x.0) * (W - 2.0 * MARGIN)
    }

    fn py(&self, y: f64) -> f64 {
        H - MARGIN - (y - self.y.0) / (self.y.1 - self.y.0) * (H - 2.0 * MARGIN)
    }
}

fn open(out: &mut String, title: &str, comments: &[String]) {
    writeln!(
        out,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{W}" height="{H}" viewBox="0 0 {W} {H}">"#
    )
    .unwrap();
    for c in comments {
        writeln!(out, "<!-- {} -->", c.replace("--", "- -")).unwrap();
    }
    writeln!(out, r#"<rect width="100%" height="100%" fill="white"/>"#).unwrap();
    writeln!(
        out,
        r#"<text x="{}" y="24" font-family="sans-serif" font-size="15" text-anchor="middle">{}</text>"#,
        W / 2.0,
        escape(title)
    )
    .unwrap();
}

fn axes(out: &mut String, f: &Frame, xlabel: &str, ylabel: &str) {
    let (x0, x1, y0, y1) = (f.px(f.x.0), f.px(f.x.1), f.py(f.y.0), f.py(f.y.1));
    writeln!(
        out,
        r#"<path d="M{x0:.1},{y1:.1} L{x0:.1},{y0:.1} L{x1:.1},{y0:.1}" fill="none" stroke="black"/>"#
    )
    .unwrap();
    for k in 0..=4 {
        let t = k as f64 / 4.0;
        let xv = f.x.0 + t * (f.x.1 - f.x.0);
        let yv = f.y.0 + t * (f.y.1 - f.y.0);
        let (px, py) = (f.px(xv), f.py(yv));
        writeln!(
            out,
            r#"<text x="{px:.1}" y="{:.1}" font-family="sans-serif" font-size="11" text-anchor="middle">{}</text>"#,
            y0 + 16.0,
            tick(xv)
        )
        .unwrap();
        writeln!(
            out,
            r#"<text x="{:.1}" y="{:.1}" font-family="sans-serif" font-size="11" text-anchor="end">{}</text>"#,
            x0 - 6.0,
            py + 4.0,
            tick(yv)
        )
        .unwrap();
    }
    writeln!(
        out,
        r#"<text x="{:.1}" y="{:.1}" font-family="sans-serif" font-size="12" text-anchor="middle">{}</text>"#,
        W / 2.0,
        H - 14.0,
        escape(xlabel)
    )
    .unwrap();
    writeln!(
        out,
        r#"<text x="14" y="{:.1}" font-family="sans-serif" font-size="12" text-anchor="middle" transform="rotate(-90 14 {:.1})">{}</text>"#,
        H / 2.0,
        H / 2.0,
        escape(ylabel)
    )
    .unwrap();
}

fn tick(v: f64) -> String {
    let s = format!("{v:.2}");
    s.trim_end_matches('0').trim_end_matches('.').to_string()
}

fn polyline(out: &mut String, f: &Frame, pts: &[(f64, f64)], color: &str, width: f64) {
    let coords: Vec<String> = pts
        .iter()
        .filter(|p| p.0.is_finite() && p.1.is_finite())
        .map(|&(x, y)| format!("{:.1},{:.1}", f.px(x), f.py(y)))
        .collect();
    writeln!(
        out,
        r#"<polyline points="{}" fill="none" stroke="{color}" stroke-width="{width}"/>"#,
        coords.join(" ")
    )
    .unwrap();
}

fn legend(out: &mut String, labels: &[&str]) {
    for (k, label) in labels.iter().enumerate() {
        let y = MARGIN + 4.0 + 16.0 * k as f64;
        let x = W - MARGIN - 150.0;
        writeln!(
            out,
            r#"<line x1="{x}" y1="{y}" x2="{}" y2="{y}" stroke="{}" stroke-width="2"/><text x="{}" y="{}" font-family="sans-serif" font-size="11">{}</text>"#,
            x + 18.0,
            COLORS[k % COLORS.len()],
            x + 24.0,
            y + 4.0,
            escape(label)
        )
        .unwrap();
    }
}

/// Line chart of several series sharing one frame.
pub fn line_chart(title: &str, xlabel: &str, ylabel: &str, series: &[Series], comments: &[String]) -> String {
    let mut out = String::new();
    open(&mut out, title, comments);
    let f = Frame::fit(series.iter().flat_map(|s| s.points.iter()));
    axes(&mut out, &f, xlabel, ylabel);
    if f.y.0 < 0.0 && f.y.1 > 0.0 {
        writeln!(
            out,
            r##"<line x1="{:.1}" y1="{:.1}" x2="{:.1}" y2="{:.1}" stroke="#999" stroke-dasharray="4 3"/>"##,
            f.px(f.x.0),
            f.py(0.0),
            f.px(f.x.1),
            f.py(0.0)
        )
        .unwrap();
    }
    for (k, s) in series.iter().enumerate() {
        polyline(&mut out, &f, &s.points, COLORS[k % COLORS.len()], 2.0);
    }
    legend(&mut out, &series.iter().map(|s| s.label.as_str()).collect::<Vec<_>>());
    out.push_str("</svg>\n");
    out
}

/// Regions, sub-region grid, the initial set and planar paths.
pub fn trajectory_map(title: &str, map: &RegionMap, paths: &[Series], comments: &[String]) -> String {
    let mut out = String::new();
    open(&mut out, title, comments);
    let corners: Vec<(f64, f64)> = map
        .regions
        .iter()
        .chain([&map.x0])
        .flat_map(|r| [(r.xlo, r.ylo), (r.xhi, r.yhi)])
        .chain(paths.iter().flat_map(|p| p.points.iter().copied()))
        .collect();
    let mut f = Frame::fit(corners.iter());
    // Equal scale on both axes.
    let span = (f.x.1 - f.x.0).max(f.y.1 - f.y.0) + 1.0;
    f.x = (
        f.x.0 - 0.5,
        f.x.0 - 0.5 + span * (W - 2.0 * MARGIN) / (H - 2.0 * MARGIN),
    );
    f.y = (f.y.0 - 0.5, f.y.0 - 0.5 + span);
    axes(&mut out, &f, "q_x", "q_y");
    let rect = |out: &mut String, r: &Rect, fill: &str, stroke: &str| {
        writeln!(
            out,
            r#"<rect x="{:.1}" y="{:.1}" width="{:.1}" height="{:.1}" fill="{fill}" stroke="{stroke}"/>"#,
            f.px(r.xlo),
            f.py(r.yhi),
            f.px(r.xhi) - f.px(r.xlo),
            f.py(r.ylo) - f.py(r.yhi)
        )
        .unwrap();
    };
    for (i, r) in map.regions.iter().enumerate() {
        for j in 1..=4 {
            rect(&mut out, &r.quadrant(j), "#eef3fb", "#b8c7e0");
        }
        rect(&mut out, r, "none", "#34495e");
        writeln!(
            out,
            r##"<text x="{:.1}" y="{:.1}" font-family="sans-serif" font-size="11" fill="#34495e">Reg {}</text>"##,
            f.px(r.xlo) + 2.0,
            f.py(r.yhi) - 3.0,
            i + 1
        )
        .unwrap();
    }
    rect(&mut out, &map.x0, "#fde9d9", "#c0504d");
    for (k, p) in paths.iter().enumerate() {
        polyline(&mut out, &f, &p.points, COLORS[k % COLORS.len()], 1.5);
    }
    if paths.len() <= 8 {
        legend(&mut out, &paths.iter().map(|s| s.label.as_str()).collect::<Vec<_>>());
    }
    out.push_str("</svg>\n");
    out
}
