//! Minimal self-contained SVG emission: enough line, bar and scatter
//! primitives for the diagnostic plots, with no plotting dependency.

use std::fmt::Write as _;

const W: f64 = 640.0;
const H: f64 = 420.0;
const MARGIN: f64 = 48.0;

pub struct Series<'a> {
    pub label: &'a str,
    pub color: &'a str,
    pub points: Vec<(f64, f64)>,
}

struct Frame {
    x_min: f64,
    x_max: f64,
    y_min: f64,
    y_max: f64,
}

impl Frame {
    fn from_points<'a>(points: impl Iterator<Item = &'a (f64, f64)>) -> Self {
        let mut f = Frame { x_min: f64::MAX, x_max: f64::MIN, y_min: f64::MAX, y_max: f64::MIN };
        for &(x, y) in points {
            f.x_min = f.x_min.min(x);
            f.x_max = f.x_max.max(x);
            f.y_min = f.y_min.min(y);
            f.y_max = f.y_max.max(y);
        }
        #[allow(clippy::neg_cmp_op_on_partial_ord)] // degenerate-or-NaN guard
        if !(f.x_min < f.x_max) {
            f.x_min -= 0.5;
            f.x_max += 0.5;
        }
        #[allow(clippy::neg_cmp_op_on_partial_ord)]
        if !(f.y_min < f.y_max) {
            f.y_min -= 0.5;
            f.y_max += 0.5;
        }
        f
    }

    fn px(&self, x: f64) -> f64 {
        MARGIN + (x - self.x_min) / (self.x_max - self.x_min) * (W - 2.0 * MARGIN)
    }

    fn py(&self, y: f64) -> f64 {
        H - MARGIN - (y - self.y_min) / (self.y_max - self.y_min) * (H - 2.0 * MARGIN)
    }
}

fn header(title: &str) -> String {
    format!(
        "<svg xmlns=\"http://www.w3.org/2000/svg\" viewBox=\"0 0 {W} {H}\" \
         font-family=\"monospace\" font-size=\"12\">\n\
         <rect width=\"{W}\" height=\"{H}\" fill=\"white\"/>\n\
         <text x=\"{}\" y=\"20\" text-anchor=\"middle\" font-size=\"14\">{title}</text>\n",
        W / 2.0
    )
}

fn axes(out: &mut String, f: &Frame) {
    let (x0, y0) = (MARGIN, H - MARGIN);
    let (x1, y1) = (W - MARGIN, MARGIN);
    let _ = write!(
        out,
        "<line x1=\"{x0}\" y1=\"{y0}\" x2=\"{x1}\" y2=\"{y0}\" stroke=\"black\"/>\n\
         <line x1=\"{x0}\" y1=\"{y0}\" x2=\"{x0}\" y2=\"{y1}\" stroke=\"black\"/>\n\
         <text x=\"{x0}\" y=\"{}\" text-anchor=\"middle\">{:.3}</text>\n\
         <text x=\"{x1}\" y=\"{}\" text-anchor=\"middle\">{:.3}</text>\n\
         <text x=\"{}\" y=\"{}\" text-anchor=\"end\">{:.3}</text>\n\
         <text x=\"{}\" y=\"{}\" text-anchor=\"end\">{:.3}</text>\n",
        y0 + 16.0,
        f.x_min,
        y0 + 16.0,
        f.x_max,
        x0 - 4.0,
        y0,
        f.y_min,
        x0 - 4.0,
        y1 + 4.0,
        f.y_max,
    );
}

/// Polyline chart, one polyline per series.
pub fn line_chart(title: &str, series: &[Series]) -> String {
    let frame = Frame::from_points(series.iter().flat_map(|s| s.points.iter()));
    let mut out = header(title);
    axes(&mut out, &frame);
    let mut legend_y = MARGIN + 4.0;
    for s in series {
        let pts: Vec<String> = s
            .points
            .iter()
            .map(|&(x, y)| format!("{:.2},{:.2}", frame.px(x), frame.py(y)))
            .collect();
        let _ = write!(
            out,
            "<polyline points=\"{}\" fill=\"none\" stroke=\"{}\" stroke-width=\"1.5\"/>\n\
             <text x=\"{}\" y=\"{legend_y}\" fill=\"{}\">{}</text>\n",
            pts.join(" "),
            s.color,
            W - MARGIN - 150.0,
            s.color,
            s.label
        );
        legend_y += 16.0;
    }
    out.push_str("</svg>\n");
    out
}

/// Scatter plot with per-point radius.
pub fn scatter_chart(title: &str, points: &[(f64, f64, f64)], color: &str) -> String {
    let plain: Vec<(f64, f64)> = points.iter().map(|&(x, y, _)| (x, y)).collect();
    let frame = Frame::from_points(plain.iter());
    let mut out = header(title);
    axes(&mut out, &frame);
    let r_max = points.iter().map(|p| p.2).fold(0.0f64, f64::max).max(1e-12);
    for &(x, y, w) in points {
        let r = 1.0 + 3.0 * (w / r_max).sqrt();
        let _ = writeln!(
            out,
            "<circle cx=\"{:.2}\" cy=\"{:.2}\" r=\"{r:.2}\" fill=\"{color}\" fill-opacity=\"0.6\"/>",
            frame.px(x),
            frame.py(y),
        );
    }
    out.push_str("</svg>\n");
    out
}

/// Bar chart (histogram) from `(center, width, height)` bars.
pub fn bar_chart(title: &str, bars: &[(f64, f64, f64)], color: &str) -> String {
    let corners: Vec<(f64, f64)> = bars
        .iter()
        .flat_map(|&(c, w, h)| [(c - w / 2.0, 0.0), (c + w / 2.0, h)])
        .collect();
    let frame = Frame::from_points(corners.iter());
    let mut out = header(title);
    axes(&mut out, &frame);
    for &(c, w, h) in bars {
        let x = frame.px(c - w / 2.0);
        let width = (frame.px(c + w / 2.0) - x).max(0.5);
        let y = frame.py(h);
        let height = (frame.py(0.0) - y).max(0.0);
        let _ = writeln!(
            out,
            "<rect x=\"{x:.2}\" y=\"{y:.2}\" width=\"{width:.2}\" height=\"{height:.2}\" \
             fill=\"{color}\" fill-opacity=\"0.7\"/>"
        );
    }
    out.push_str("</svg>\n");
    out
}
