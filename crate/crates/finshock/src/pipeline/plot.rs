//! Plot data files and static SVG renderings.
//!
//! Figures are emitted twice: a plain CSV any plotting tool can consume,
//! and a self-contained SVG line chart for direct viewing.

use std::fmt::Write as _;

use crate::lp::IrfResult;

const WIDTH: f64 = 720.0;
const HEIGHT: f64 = 420.0;
const MARGIN_LEFT: f64 = 64.0;
const MARGIN_RIGHT: f64 = 16.0;
const MARGIN_TOP: f64 = 28.0;
const MARGIN_BOTTOM: f64 = 44.0;

/// IRF plot data: `horizon,beta,lo68,hi68,lo90,hi90`.
pub fn irf_plot_csv(irf: &IrfResult) -> String {
    let mut out = String::from("horizon,beta,lo68,hi68,lo90,hi90\n");
    for p in &irf.points {
        let _ = writeln!(
            out,
            "{},{},{},{},{},{}",
            p.horizon, p.beta, p.lo68, p.hi68, p.lo90, p.hi90
        );
    }
    out
}

struct Frame {
    x_min: f64,
    x_max: f64,
    y_min: f64,
    y_max: f64,
}

impl Frame {
    fn x(&self, v: f64) -> f64 {
        let span = (self.x_max - self.x_min).max(f64::MIN_POSITIVE);
        MARGIN_LEFT + (v - self.x_min) / span * (WIDTH - MARGIN_LEFT - MARGIN_RIGHT)
    }

    fn y(&self, v: f64) -> f64 {
        let span = (self.y_max - self.y_min).max(f64::MIN_POSITIVE);
        HEIGHT - MARGIN_BOTTOM - (v - self.y_min) / span * (HEIGHT - MARGIN_TOP - MARGIN_BOTTOM)
    }
}

fn polyline(points: impl Iterator<Item = (f64, f64)>) -> String {
    points
        .map(|(x, y)| format!("{x:.2},{y:.2}"))
        .collect::<Vec<_>>()
        .join(" ")
}

fn axis_ticks(min: f64, max: f64, count: usize) -> Vec<f64> {
    (0..=count)
        .map(|i| min + (max - min) * i as f64 / count as f64)
        .collect()
}

fn svg_header(title: &str) -> String {
    format!(
        concat!(
            "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{w}\" height=\"{h}\" ",
            "viewBox=\"0 0 {w} {h}\" font-family=\"sans-serif\" font-size=\"12\">\n",
            "<rect width=\"{w}\" height=\"{h}\" fill=\"white\"/>\n",
            "<text x=\"{tx}\" y=\"18\" text-anchor=\"middle\" font-size=\"14\">{title}</text>\n"
        ),
        w = WIDTH,
        h = HEIGHT,
        tx = WIDTH / 2.0,
        title = title
    )
}

fn svg_axes(frame: &Frame, x_label: &str, y_label: &str) -> String {
    let mut out = String::new();
    let x0 = frame.x(frame.x_min);
    let x1 = frame.x(frame.x_max);
    let y0 = frame.y(frame.y_min);
    let y1 = frame.y(frame.y_max);
    let _ = writeln!(
        out,
        "<line x1=\"{x0:.2}\" y1=\"{y0:.2}\" x2=\"{x1:.2}\" y2=\"{y0:.2}\" stroke=\"black\"/>"
    );
    let _ = writeln!(
        out,
        "<line x1=\"{x0:.2}\" y1=\"{y0:.2}\" x2=\"{x0:.2}\" y2=\"{y1:.2}\" stroke=\"black\"/>"
    );
    for tick in axis_ticks(frame.x_min, frame.x_max, 5) {
        let x = frame.x(tick);
        let _ = writeln!(
            out,
            "<line x1=\"{x:.2}\" y1=\"{y0:.2}\" x2=\"{x:.2}\" y2=\"{:.2}\" stroke=\"black\"/>\n\
             <text x=\"{x:.2}\" y=\"{:.2}\" text-anchor=\"middle\">{tick:.1}</text>",
            y0 + 4.0,
            y0 + 18.0
        );
    }
    for tick in axis_ticks(frame.y_min, frame.y_max, 4) {
        let y = frame.y(tick);
        let _ = writeln!(
            out,
            "<line x1=\"{:.2}\" y1=\"{y:.2}\" x2=\"{x0:.2}\" y2=\"{y:.2}\" stroke=\"black\"/>\n\
             <text x=\"{:.2}\" y=\"{:.2}\" text-anchor=\"end\">{tick:.2}</text>",
            x0 - 4.0,
            x0 - 8.0,
            y + 4.0
        );
    }
    let _ = writeln!(
        out,
        "<text x=\"{:.2}\" y=\"{:.2}\" text-anchor=\"middle\">{x_label}</text>",
        (x0 + x1) / 2.0,
        HEIGHT - 8.0
    );
    let _ = writeln!(
        out,
        "<text x=\"14\" y=\"{:.2}\" text-anchor=\"middle\" transform=\"rotate(-90 14 {:.2})\">{y_label}</text>",
        (y0 + y1) / 2.0,
        (y0 + y1) / 2.0
    );
    out
}

/// Renders an IRF as bands plus the point estimate line, with a zero line.
pub fn irf_svg(irf: &IrfResult) -> String {
    let pts = &irf.points;
    let y_min = pts.iter().map(|p| p.lo90).fold(f64::INFINITY, f64::min).min(0.0);
    let y_max = pts.iter().map(|p| p.hi90).fold(f64::NEG_INFINITY, f64::max).max(0.0);
    let pad = 0.05 * (y_max - y_min).max(1e-12);
    let frame = Frame {
        x_min: 0.0,
        x_max: pts.last().map(|p| p.horizon as f64).unwrap_or(1.0).max(1.0),
        y_min: y_min - pad,
        y_max: y_max + pad,
    };
    let mut svg = svg_header(&format!("{} to {}", irf.outcome, irf.shock));
    for (lo, hi, fill) in [
        (
            pts.iter().map(|p| p.lo90).collect::<Vec<_>>(),
            pts.iter().map(|p| p.hi90).collect::<Vec<_>>(),
            "#c9d7ea",
        ),
        (
            pts.iter().map(|p| p.lo68).collect::<Vec<_>>(),
            pts.iter().map(|p| p.hi68).collect::<Vec<_>>(),
            "#9db8dd",
        ),
    ] {
        let upper = pts
            .iter()
            .zip(&hi)
            .map(|(p, v)| (frame.x(p.horizon as f64), frame.y(*v)));
        let lower = pts
            .iter()
            .rev()
            .zip(lo.iter().rev())
            .map(|(p, v)| (frame.x(p.horizon as f64), frame.y(*v)));
        let _ = writeln!(
            svg,
            "<polygon points=\"{}\" fill=\"{fill}\" stroke=\"none\"/>",
            polyline(upper.chain(lower))
        );
    }
    let zero_y = frame.y(0.0);
    let _ = writeln!(
        svg,
        "<line x1=\"{:.2}\" y1=\"{zero_y:.2}\" x2=\"{:.2}\" y2=\"{zero_y:.2}\" stroke=\"#888\" stroke-dasharray=\"4 3\"/>",
        frame.x(frame.x_min),
        frame.x(frame.x_max)
    );
    let _ = writeln!(
        svg,
        "<polyline points=\"{}\" fill=\"none\" stroke=\"#1f4e9c\" stroke-width=\"2\"/>",
        polyline(
            pts.iter()
                .map(|p| (frame.x(p.horizon as f64), frame.y(p.beta)))
        )
    );
    svg.push_str(&svg_axes(&frame, "horizon (quarters)", &irf.outcome));
    svg.push_str("</svg>\n");
    svg
}

/// Scatter of paired observations with a fitted line.
pub fn scatter_svg(
    title: &str,
    x_label: &str,
    y_label: &str,
    points: &[(f64, f64)],
    slope: f64,
    intercept: f64,
) -> String {
    let x_min = points.iter().map(|p| p.0).fold(f64::INFINITY, f64::min);
    let x_max = points.iter().map(|p| p.0).fold(f64::NEG_INFINITY, f64::max);
    let y_min = points.iter().map(|p| p.1).fold(f64::INFINITY, f64::min);
    let y_max = points.iter().map(|p| p.1).fold(f64::NEG_INFINITY, f64::max);
    let x_pad = 0.05 * (x_max - x_min).max(1e-12);
    let y_pad = 0.05 * (y_max - y_min).max(1e-12);
    let frame = Frame {
        x_min: x_min - x_pad,
        x_max: x_max + x_pad,
        y_min: y_min - y_pad,
        y_max: y_max + y_pad,
    };
    let mut svg = svg_header(title);
    for (x, y) in points {
        let _ = writeln!(
            svg,
            "<circle cx=\"{:.2}\" cy=\"{:.2}\" r=\"2.5\" fill=\"#1f4e9c\" fill-opacity=\"0.55\"/>",
            frame.x(*x),
            frame.y(*y)
        );
    }
    let _ = writeln!(
        svg,
        "<line x1=\"{:.2}\" y1=\"{:.2}\" x2=\"{:.2}\" y2=\"{:.2}\" stroke=\"black\" stroke-width=\"2\"/>",
        frame.x(frame.x_min),
        frame.y(intercept + slope * frame.x_min),
        frame.x(frame.x_max),
        frame.y(intercept + slope * frame.x_max)
    );
    svg.push_str(&svg_axes(&frame, x_label, y_label));
    svg.push_str("</svg>\n");
    svg
}
