//! Standalone SVG line chart: one polyline per strategy over a translucent
//! confidence band, linear axes, legend.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use crate::aggregate::AggregateCurve;
use crate::{ExperimentError, Result};

const WIDTH: f64 = 800.0;
const HEIGHT: f64 = 500.0;
const MARGIN_LEFT: f64 = 70.0;
const MARGIN_RIGHT: f64 = 200.0;
const MARGIN_TOP: f64 = 30.0;
const MARGIN_BOTTOM: f64 = 55.0;
const TICKS: usize = 5;

const PALETTE: [&str; 8] = [
    "#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b", "#e377c2", "#17becf",
];

/// Maps data coordinates to pixels.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Frame {
    pub x_min: f64,
    pub x_max: f64,
    pub y_min: f64,
    pub y_max: f64,
}

impl Frame {
    /// Axis ranges covering every episode and every band edge.
    pub fn fit(curves: &AggregateCurve) -> Self {
        let episodes = curves.curves.iter().map(|c| c.mean.len()).max().unwrap_or(1);
        let mut lo = f64::INFINITY;
        let mut hi = f64::NEG_INFINITY;
        for c in &curves.curves {
            for (m, h) in c.mean.iter().zip(&c.half_width) {
                lo = lo.min(m - h);
                hi = hi.max(m + h);
            }
        }
        if !lo.is_finite() || !hi.is_finite() {
            (lo, hi) = (0.0, 1.0);
        }
        if hi - lo < 1e-12 {
            let pad = if hi.abs() > 0.0 { hi.abs() * 0.1 } else { 1.0 };
            (lo, hi) = (lo - pad, hi + pad);
        }
        let (x_min, x_max) = if episodes > 1 { (1.0, episodes as f64) } else { (0.5, 1.5) };
        Frame { x_min, x_max, y_min: lo, y_max: hi }
    }

    pub fn x_px(&self, episode: f64) -> f64 {
        MARGIN_LEFT + (episode - self.x_min) / (self.x_max - self.x_min) * (WIDTH - MARGIN_LEFT - MARGIN_RIGHT)
    }

    pub fn y_px(&self, value: f64) -> f64 {
        HEIGHT - MARGIN_BOTTOM - (value - self.y_min) / (self.y_max - self.y_min) * (HEIGHT - MARGIN_TOP - MARGIN_BOTTOM)
    }
}

/// Formats a pixel coordinate as written into the document.
pub fn px(v: f64) -> String {
    format!("{v:.3}")
}

fn escape(text: &str) -> String {
    text.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;").replace('"', "&quot;")
}

fn tick_label(v: f64) -> String {
    let s = format!("{v:.3}");
    let s = s.trim_end_matches('0').trim_end_matches('.');
    if s == "-0" { "0".into() } else { s.to_string() }
}

pub fn render_svg_string(curves: &AggregateCurve) -> Result<String> {
    if curves.curves.is_empty() || curves.curves.iter().all(|c| c.mean.is_empty()) {
        return Err(ExperimentError::Aggregate("nothing to plot".into()));
    }
    let frame = Frame::fit(curves);
    let plot_right = WIDTH - MARGIN_RIGHT;
    let plot_bottom = HEIGHT - MARGIN_BOTTOM;
    let mut svg = String::new();

    let _ = writeln!(
        svg,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}" font-family="sans-serif" font-size="12">"#
    );
    let _ = writeln!(svg, r#"<rect x="0" y="0" width="{WIDTH}" height="{HEIGHT}" fill="white"/>"#);

    // axes
    let _ = writeln!(
        svg,
        r#"<g class="axes" stroke="black" stroke-width="1"><line x1="{l}" y1="{b}" x2="{r}" y2="{b}"/><line x1="{l}" y1="{t}" x2="{l}" y2="{b}"/></g>"#,
        l = px(MARGIN_LEFT),
        r = px(plot_right),
        t = px(MARGIN_TOP),
        b = px(plot_bottom),
    );
    for i in 0..TICKS {
        let frac = i as f64 / (TICKS - 1) as f64;
        let ex = frame.x_min + frac * (frame.x_max - frame.x_min);
        let vy = frame.y_min + frac * (frame.y_max - frame.y_min);
        let (x, y) = (frame.x_px(ex), frame.y_px(vy));
        let _ = writeln!(
            svg,
            r#"<line x1="{x}" y1="{b}" x2="{x}" y2="{b5}" stroke="black"/><text x="{x}" y="{bl}" text-anchor="middle">{label}</text>"#,
            x = px(x),
            b = px(plot_bottom),
            b5 = px(plot_bottom + 5.0),
            bl = px(plot_bottom + 18.0),
            label = tick_label(ex),
        );
        let _ = writeln!(
            svg,
            r#"<line x1="{l5}" y1="{y}" x2="{l}" y2="{y}" stroke="black"/><text x="{ll}" y="{yt}" text-anchor="end">{label}</text>"#,
            l5 = px(MARGIN_LEFT - 5.0),
            l = px(MARGIN_LEFT),
            ll = px(MARGIN_LEFT - 8.0),
            y = px(y),
            yt = px(y + 4.0),
            label = tick_label(vy),
        );
    }
    let _ = writeln!(
        svg,
        r#"<text x="{x}" y="{y}" text-anchor="middle">episode</text>"#,
        x = px((MARGIN_LEFT + plot_right) / 2.0),
        y = px(HEIGHT - 12.0),
    );
    let _ = writeln!(
        svg,
        r#"<text x="16" y="{y}" text-anchor="middle" transform="rotate(-90 16 {y})">RMS error</text>"#,
        y = px((MARGIN_TOP + plot_bottom) / 2.0),
    );

    for (k, c) in curves.curves.iter().enumerate() {
        let colour = PALETTE[k % PALETTE.len()];
        let label = escape(&c.label);
        let xs: Vec<f64> = (1..=c.mean.len()).map(|e| frame.x_px(e as f64)).collect();

        let upper = xs.iter().zip(c.mean.iter().zip(&c.half_width)).map(|(x, (m, h))| (*x, frame.y_px(m + h)));
        let lower = xs.iter().zip(c.mean.iter().zip(&c.half_width)).rev().map(|(x, (m, h))| (*x, frame.y_px(m - h)));
        let band: Vec<String> = upper.chain(lower).map(|(x, y)| format!("{},{}", px(x), px(y))).collect();
        let line: Vec<String> = xs
            .iter()
            .zip(&c.mean)
            .map(|(x, m)| format!("{},{}", px(*x), px(frame.y_px(*m))))
            .collect();

        let _ = writeln!(svg, r#"<g class="series" data-strategy="{label}">"#);
        let _ = writeln!(
            svg,
            r#"<polygon class="band" points="{}" fill="{colour}" fill-opacity="0.2" stroke="none"/>"#,
            band.join(" ")
        );
        let _ = writeln!(
            svg,
            r#"<polyline class="mean" points="{}" fill="none" stroke="{colour}" stroke-width="1.5"/>"#,
            line.join(" ")
        );
        let _ = writeln!(svg, "</g>");

        let ly = MARGIN_TOP + 10.0 + 20.0 * k as f64;
        let _ = writeln!(
            svg,
            r#"<g class="legend"><line x1="{x0}" y1="{y}" x2="{x1}" y2="{y}" stroke="{colour}" stroke-width="3"/><text x="{xt}" y="{yt}">{label}</text></g>"#,
            x0 = px(plot_right + 15.0),
            x1 = px(plot_right + 40.0),
            xt = px(plot_right + 46.0),
            y = px(ly),
            yt = px(ly + 4.0),
        );
    }
    svg.push_str("</svg>\n");
    Ok(svg)
}

pub fn render_svg(curves: &AggregateCurve, path: &Path) -> Result<()> {
    fs::write(path, render_svg_string(curves)?)?;
    Ok(())
}
