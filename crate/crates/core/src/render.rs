//! Dependency-free SVG figures: bird's-eye failure trajectories, coverage or
//! violations over time with a standard-error band, and Q-table growth.

use crate::geom::Vec2;
use crate::microworld::Route;
use std::fmt::Write as _;

const PALETTE: [&str; 6] = [
    "#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#17becf",
];

struct Viewport {
    min: Vec2,
    scale: f64,
    width: f64,
    height: f64,
    margin: f64,
}

impl Viewport {
    fn fit(points: impl Iterator<Item = Vec2>, target_w: f64, margin: f64) -> Viewport {
        let mut min = Vec2::new(f64::INFINITY, f64::INFINITY);
        let mut max = Vec2::new(f64::NEG_INFINITY, f64::NEG_INFINITY);
        for p in points {
            min.x = min.x.min(p.x);
            min.y = min.y.min(p.y);
            max.x = max.x.max(p.x);
            max.y = max.y.max(p.y);
        }
        if !min.x.is_finite() {
            min = Vec2::ZERO;
            max = Vec2::new(1.0, 1.0);
        }
        let span_x = (max.x - min.x).max(1.0);
        let span_y = (max.y - min.y).max(1.0);
        let scale = (target_w - 2.0 * margin) / span_x;
        Viewport {
            min,
            scale,
            width: target_w,
            height: span_y * scale + 2.0 * margin,
            margin,
        }
    }

    /// World to screen; the vertical axis flips.
    fn map(&self, p: Vec2) -> (f64, f64) {
        (
            self.margin + (p.x - self.min.x) * self.scale,
            self.height - self.margin - (p.y - self.min.y) * self.scale,
        )
    }
}

fn poly_points(vp: &Viewport, pts: impl Iterator<Item = Vec2>) -> String {
    let mut out = String::new();
    for p in pts {
        let (x, y) = vp.map(p);
        write!(out, "{x:.2},{y:.2} ").unwrap();
    }
    out.trim_end().to_string()
}

/// Lane boundary polylines offset from the centerline by the half-width.
fn lane_boundary(route: &Route, side: f64) -> Vec<Vec2> {
    let pts = route.line.points();
    let hw = route.spec.lane_half_width * side;
    let mut out = Vec::with_capacity(pts.len());
    for i in 0..pts.len() {
        let dir = if i == 0 {
            pts[1] - pts[0]
        } else if i == pts.len() - 1 {
            pts[i] - pts[i - 1]
        } else {
            (pts[i + 1] - pts[i - 1]).scale(0.5)
        };
        let len = dir.norm();
        let normal = Vec2::new(-dir.y / len, dir.x / len);
        out.push(pts[i] + normal.scale(hw));
    }
    out
}

/// Bird's-eye view: lane boundaries, obstacles, the ego start marker, and
/// one polyline per failing episode's lead-vehicle trajectory.
pub fn trajectories_svg(route: &Route, trajectories: &[Vec<(f64, f64)>], title: &str) -> String {
    let left = lane_boundary(route, 1.0);
    let right = lane_boundary(route, -1.0);
    let all_points = left
        .iter()
        .chain(right.iter())
        .cloned()
        .chain(route.spec.obstacles.iter().flat_map(|o| o.corners()))
        .chain(
            trajectories
                .iter()
                .flatten()
                .map(|(x, y)| Vec2::new(*x, *y)),
        );
    let vp = Viewport::fit(all_points, 860.0, 30.0);

    let mut svg = String::new();
    write!(
        svg,
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{:.0}\" height=\"{:.0}\" viewBox=\"0 0 {:.0} {:.0}\">",
        vp.width, vp.height + 24.0, vp.width, vp.height + 24.0
    )
    .unwrap();
    write!(
        svg,
        "<rect width=\"100%\" height=\"100%\" fill=\"white\"/><text x=\"12\" y=\"18\" font-family=\"sans-serif\" font-size=\"14\">{}</text><g transform=\"translate(0 24)\">",
        xml_escape(title)
    )
    .unwrap();

    for boundary in [&left, &right] {
        write!(
            svg,
            "<polyline class=\"lane\" fill=\"none\" stroke=\"#cc2222\" stroke-width=\"1.5\" points=\"{}\"/>",
            poly_points(&vp, boundary.iter().cloned())
        )
        .unwrap();
    }

    for o in &route.spec.obstacles {
        write!(
            svg,
            "<polygon class=\"obstacle\" fill=\"#555\" fill-opacity=\"0.8\" points=\"{}\"/>",
            poly_points(&vp, o.corners().into_iter())
        )
        .unwrap();
    }

    // ego start marker
    let (sx, sy) = vp.map(route.spec.ev_start.position());
    write!(svg, "<circle cx=\"{sx:.2}\" cy=\"{sy:.2}\" r=\"5\" fill=\"black\"/>").unwrap();

    for (i, t) in trajectories.iter().enumerate() {
        if t.is_empty() {
            continue;
        }
        let color = PALETTE[i % PALETTE.len()];
        write!(
            svg,
            "<polyline class=\"trajectory\" fill=\"none\" stroke=\"{color}\" stroke-opacity=\"0.65\" stroke-width=\"1.2\" points=\"{}\"/>",
            poly_points(&vp, t.iter().map(|(x, y)| Vec2::new(*x, *y)))
        )
        .unwrap();
    }
    svg.push_str("</g></svg>");
    svg
}

/// One named line with a shaded +/- band.
pub struct BandSeries {
    pub label: String,
    pub mean: Vec<f64>,
    pub band: Vec<f64>,
}

fn chart_frame(
    svg: &mut String,
    title: &str,
    x_label: &str,
    y_label: &str,
    w: f64,
    h: f64,
) -> (f64, f64, f64, f64) {
    write!(
        svg,
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{w:.0}\" height=\"{h:.0}\" viewBox=\"0 0 {w:.0} {h:.0}\">"
    )
    .unwrap();
    svg.push_str("<rect width=\"100%\" height=\"100%\" fill=\"white\"/>");
    write!(
        svg,
        "<text x=\"14\" y=\"20\" font-family=\"sans-serif\" font-size=\"14\">{}</text>",
        xml_escape(title)
    )
    .unwrap();
    let (x0, y0, x1, y1) = (62.0, 36.0, w - 18.0, h - 44.0);
    write!(
        svg,
        "<line x1=\"{x0}\" y1=\"{y1}\" x2=\"{x1}\" y2=\"{y1}\" stroke=\"black\"/><line x1=\"{x0}\" y1=\"{y0}\" x2=\"{x0}\" y2=\"{y1}\" stroke=\"black\"/>"
    )
    .unwrap();
    write!(
        svg,
        "<text x=\"{:.0}\" y=\"{:.0}\" font-family=\"sans-serif\" font-size=\"11\" text-anchor=\"middle\">{}</text>",
        (x0 + x1) / 2.0,
        h - 12.0,
        xml_escape(x_label)
    )
    .unwrap();
    write!(
        svg,
        "<text x=\"16\" y=\"{:.0}\" font-family=\"sans-serif\" font-size=\"11\" transform=\"rotate(-90 16 {:.0})\" text-anchor=\"middle\">{}</text>",
        (y0 + y1) / 2.0,
        (y0 + y1) / 2.0,
        xml_escape(y_label)
    )
    .unwrap();
    (x0, y0, x1, y1)
}

/// Mean-with-band chart over a shared step grid (coverage or violations
/// over time).
pub fn timeline_svg(
    series: &[BandSeries],
    steps: &[u64],
    title: &str,
    y_label: &str,
) -> String {
    let mut svg = String::new();
    let (x0, y0, x1, y1) = chart_frame(&mut svg, title, "step", y_label, 760.0, 420.0);
    let x_max = steps.last().copied().unwrap_or(1).max(1) as f64;
    let y_max = series
        .iter()
        .flat_map(|s| s.mean.iter().zip(&s.band).map(|(m, b)| m + b))
        .fold(0.0f64, f64::max)
        .max(1e-9);
    let map = |t: f64, v: f64| -> (f64, f64) {
        (
            x0 + t / x_max * (x1 - x0),
            y1 - (v / (y_max * 1.05)) * (y1 - y0),
        )
    };

    // y axis ticks
    for i in 0..=4 {
        let v = y_max * 1.05 * i as f64 / 4.0;
        let (_, y) = map(0.0, v);
        write!(
            svg,
            "<line x1=\"{:.1}\" y1=\"{y:.1}\" x2=\"{x0}\" y2=\"{y:.1}\" stroke=\"black\"/><text x=\"{:.1}\" y=\"{:.1}\" font-family=\"sans-serif\" font-size=\"10\" text-anchor=\"end\">{v:.2}</text>",
            x0 - 4.0,
            x0 - 7.0,
            y + 3.5
        )
        .unwrap();
    }

    for (i, s) in series.iter().enumerate() {
        let color = PALETTE[i % PALETTE.len()];
        // shaded band
        let mut pts = String::new();
        for (k, (m, b)) in s.mean.iter().zip(&s.band).enumerate() {
            let (x, y) = map(steps[k] as f64, m + b);
            write!(pts, "{x:.2},{y:.2} ").unwrap();
        }
        for (k, (m, b)) in s.mean.iter().zip(&s.band).enumerate().rev() {
            let (x, y) = map(steps[k] as f64, (m - b).max(0.0));
            write!(pts, "{x:.2},{y:.2} ").unwrap();
        }
        write!(
            svg,
            "<polygon class=\"band\" fill=\"{color}\" fill-opacity=\"0.15\" points=\"{}\"/>",
            pts.trim_end()
        )
        .unwrap();
        let mut line = String::new();
        for (k, m) in s.mean.iter().enumerate() {
            let (x, y) = map(steps[k] as f64, *m);
            write!(line, "{x:.2},{y:.2} ").unwrap();
        }
        write!(
            svg,
            "<polyline class=\"mean\" fill=\"none\" stroke=\"{color}\" stroke-width=\"1.8\" points=\"{}\"/>",
            line.trim_end()
        )
        .unwrap();
        write!(
            svg,
            "<text x=\"{:.0}\" y=\"{:.0}\" font-family=\"sans-serif\" font-size=\"12\" fill=\"{color}\">{}</text>",
            x0 + 10.0,
            y0 + 16.0 * (i as f64 + 1.0),
            xml_escape(&s.label)
        )
        .unwrap();
    }
    svg.push_str("</svg>");
    svg
}

pub struct GrowthSeries {
    pub label: String,
    pub points: Vec<(u64, u64)>,
}

/// Distinct-states-over-steps chart; each legend entry carries the final
/// states/steps ratio.
pub fn growth_svg(series: &[GrowthSeries], title: &str) -> String {
    let mut svg = String::new();
    let (x0, y0, x1, y1) = chart_frame(&mut svg, title, "step", "distinct states", 760.0, 420.0);
    let x_max = series
        .iter()
        .flat_map(|s| s.points.last().map(|p| p.0))
        .max()
        .unwrap_or(1)
        .max(1) as f64;
    let y_max = series
        .iter()
        .flat_map(|s| s.points.iter().map(|p| p.1))
        .max()
        .unwrap_or(1)
        .max(1) as f64;
    let map = |t: f64, v: f64| -> (f64, f64) {
        (
            x0 + t / x_max * (x1 - x0),
            y1 - (v / (y_max * 1.05)) * (y1 - y0),
        )
    };
    for (i, s) in series.iter().enumerate() {
        let color = PALETTE[i % PALETTE.len()];
        let mut line = String::new();
        for (t, v) in &s.points {
            let (x, y) = map(*t as f64, *v as f64);
            write!(line, "{x:.2},{y:.2} ").unwrap();
        }
        write!(
            svg,
            "<polyline fill=\"none\" stroke=\"{color}\" stroke-width=\"1.6\" points=\"{}\"/>",
            line.trim_end()
        )
        .unwrap();
        let ratio = s
            .points
            .last()
            .map(|(t, v)| *v as f64 / (*t).max(1) as f64)
            .unwrap_or(0.0);
        write!(
            svg,
            "<text x=\"{:.0}\" y=\"{:.0}\" font-family=\"sans-serif\" font-size=\"12\" fill=\"{color}\">{} (states/steps = {ratio:.3})</text>",
            x0 + 10.0,
            y0 + 16.0 * (i as f64 + 1.0),
            xml_escape(&s.label)
        )
        .unwrap();
    }
    svg.push_str("</svg>");
    svg
}

fn xml_escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}
