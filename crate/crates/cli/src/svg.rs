//! Minimal standalone SVG plots.

use std::fmt::Write as _;

const WIDTH: f64 = 720.0;
const HEIGHT: f64 = 480.0;
const LEFT: f64 = 80.0;
const RIGHT: f64 = 24.0;
const TOP: f64 = 40.0;
const BOTTOM: f64 = 60.0;
const TICKS: usize = 5;
const PALETTE: [&str; 6] = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#17becf"];

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PlotKind {
    Scatter,
    Line,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Series {
    pub name: String,
    pub points: Vec<(f64, f64)>,
}

/// A horizontal line at `y`.
#[derive(Debug, Clone, PartialEq)]
pub struct RefLine {
    pub y: f64,
    pub label: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PlotSpec {
    pub kind: PlotKind,
    pub title: String,
    pub x_label: String,
    pub y_label: String,
    pub series: Vec<Series>,
    pub reference_lines: Vec<RefLine>,
}

impl PlotSpec {
    pub fn new(kind: PlotKind, title: &str, x_label: &str, y_label: &str) -> Self {
        PlotSpec {
            kind,
            title: title.into(),
            x_label: x_label.into(),
            y_label: y_label.into(),
            series: Vec::new(),
            reference_lines: Vec::new(),
        }
    }

    pub fn with_series(mut self, name: &str, points: Vec<(f64, f64)>) -> Self {
        self.series.push(Series {
            name: name.into(),
            points,
        });
        self
    }

    pub fn with_reference(mut self, y: f64, label: &str) -> Self {
        self.reference_lines.push(RefLine {
            y,
            label: label.into(),
        });
        self
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Rendered {
    pub svg: String,
    /// Points with a non-finite coordinate, left out of the plot.
    pub dropped: usize,
}

fn escape(s: &str) -> String {
    let mut out = String::with_capacity(s.len());
    for c in s.chars() {
        match c {
            '&' => out.push_str("&amp;"),
            '<' => out.push_str("&lt;"),
            '>' => out.push_str("&gt;"),
            '"' => out.push_str("&quot;"),
            '\'' => out.push_str("&apos;"),
            c => out.push(c),
        }
    }
    out
}

fn tick_label(v: f64) -> String {
    let a = v.abs();
    if v == 0.0 {
        "0".into()
    } else if (1e-3..1e4).contains(&a) {
        let s = format!("{v:.3}");
        s.trim_end_matches('0').trim_end_matches('.').to_string()
    } else {
        format!("{v:.2e}")
    }
}

fn padded(lo: f64, hi: f64) -> (f64, f64) {
    if !lo.is_finite() || !hi.is_finite() {
        return (0.0, 1.0);
    }
    let span = hi - lo;
    if span <= 0.0 {
        let pad = if lo == 0.0 { 0.5 } else { 0.05 * lo.abs() };
        return (lo - pad, hi + pad);
    }
    (lo - 0.04 * span, hi + 0.04 * span)
}

pub fn render(spec: &PlotSpec) -> Rendered {
    let mut dropped = 0;
    let series: Vec<Vec<(f64, f64)>> = spec
        .series
        .iter()
        .map(|s| {
            let kept: Vec<(f64, f64)> = s
                .points
                .iter()
                .copied()
                .filter(|(x, y)| x.is_finite() && y.is_finite())
                .collect();
            dropped += s.points.len() - kept.len();
            kept
        })
        .collect();
    let refs: Vec<&RefLine> = spec.reference_lines.iter().filter(|r| r.y.is_finite()).collect();

    let mut x_range = (f64::INFINITY, f64::NEG_INFINITY);
    let mut y_range = (f64::INFINITY, f64::NEG_INFINITY);
    for &(x, y) in series.iter().flatten() {
        x_range = (x_range.0.min(x), x_range.1.max(x));
        y_range = (y_range.0.min(y), y_range.1.max(y));
    }
    for r in &refs {
        y_range = (y_range.0.min(r.y), y_range.1.max(r.y));
    }
    let (x0, x1) = padded(x_range.0, x_range.1);
    let (y0, y1) = padded(y_range.0, y_range.1);
    let plot_w = WIDTH - LEFT - RIGHT;
    let plot_h = HEIGHT - TOP - BOTTOM;
    let px = |x: f64| LEFT + (x - x0) / (x1 - x0) * plot_w;
    let py = |y: f64| TOP + (y1 - y) / (y1 - y0) * plot_h;

    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}">"#
    );
    s.push_str("<style>.axis{stroke:#000;stroke-width:1}.tick{font:11px sans-serif}.label{font:13px sans-serif}.ref{stroke:#888;stroke-dasharray:6 4}</style>\n");
    let _ = writeln!(s, r##"<rect width="100%" height="100%" fill="#fff"/>"##);
    let _ = writeln!(
        s,
        r#"<text class="label" x="{}" y="22" text-anchor="middle">{}</text>"#,
        WIDTH / 2.0,
        escape(&spec.title)
    );

    let (ax, ay) = (LEFT, TOP + plot_h);
    let _ = writeln!(
        s,
        r#"<line class="axis" x1="{ax}" y1="{ay}" x2="{}" y2="{ay}"/>"#,
        LEFT + plot_w
    );
    let _ = writeln!(s, r#"<line class="axis" x1="{ax}" y1="{TOP}" x2="{ax}" y2="{ay}"/>"#);
    for i in 0..=TICKS {
        let f = i as f64 / TICKS as f64;
        let (xv, yv) = (x0 + f * (x1 - x0), y0 + f * (y1 - y0));
        let _ = writeln!(
            s,
            r#"<text class="tick" x="{:.2}" y="{:.2}" text-anchor="middle">{}</text>"#,
            px(xv),
            ay + 18.0,
            tick_label(xv)
        );
        let _ = writeln!(
            s,
            r#"<text class="tick" x="{:.2}" y="{:.2}" text-anchor="end">{}</text>"#,
            LEFT - 6.0,
            py(yv) + 4.0,
            tick_label(yv)
        );
    }
    let _ = writeln!(
        s,
        r#"<text class="label" x="{}" y="{}" text-anchor="middle">{}</text>"#,
        LEFT + plot_w / 2.0,
        HEIGHT - 16.0,
        escape(&spec.x_label)
    );
    let _ = writeln!(
        s,
        r#"<text class="label" x="18" y="{0}" text-anchor="middle" transform="rotate(-90 18 {0})">{1}</text>"#,
        TOP + plot_h / 2.0,
        escape(&spec.y_label)
    );

    for r in &refs {
        let _ = writeln!(
            s,
            r#"<line class="ref" x1="{ax}" y1="{0:.2}" x2="{1}" y2="{0:.2}"><title>{2}</title></line>"#,
            py(r.y),
            LEFT + plot_w,
            escape(&r.label)
        );
    }

    for (k, (points, meta)) in series.iter().zip(&spec.series).enumerate() {
        let color = PALETTE[k % PALETTE.len()];
        let _ = writeln!(s, r#"<g class="series" fill="{color}" stroke="{color}"><title>{}</title>"#, escape(&meta.name));
        match spec.kind {
            PlotKind::Scatter => {
                for &(x, y) in points {
                    let _ = writeln!(s, r#"<circle cx="{:.2}" cy="{:.2}" r="1.5" stroke="none"/>"#, px(x), py(y));
                }
            }
            PlotKind::Line => {
                if !points.is_empty() {
                    let coords: Vec<String> =
                        points.iter().map(|&(x, y)| format!("{:.2},{:.2}", px(x), py(y))).collect();
                    let _ = writeln!(
                        s,
                        r#"<polyline fill="none" stroke-width="1.5" points="{}"/>"#,
                        coords.join(" ")
                    );
                }
            }
        }
        s.push_str("</g>\n");
    }
    s.push_str("</svg>\n");
    Rendered { svg: s, dropped }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn parse(svg: &str) -> roxmltree::Document<'_> {
        roxmltree::Document::parse(svg).expect("well-formed SVG")
    }

    fn count(doc: &roxmltree::Document, tag: &str) -> usize {
        doc.descendants().filter(|n| n.has_tag_name(tag)).count()
    }

    #[test]
    fn empty_plot_has_axes() {
        let r = render(&PlotSpec::new(PlotKind::Line, "empty", "x", "y"));
        let doc = parse(&r.svg);
        let axes = doc
            .descendants()
            .filter(|n| n.has_tag_name("line") && n.attribute("class") == Some("axis"))
            .count();
        assert_eq!(axes, 2);
        assert_eq!(r.dropped, 0);
        assert_eq!(count(&doc, "polyline"), 0);
    }

    #[test]
    fn one_reference_line() {
        let spec = PlotSpec::new(PlotKind::Line, "scan", "kappa", "lambda_min")
            .with_series("lambda_min", vec![(0.0, 0.0), (1.0, 0.1), (2.0, 0.2)])
            .with_reference(-1.0, "flip boundary");
        let svg = render(&spec).svg;
        let doc = parse(&svg);
        let refs = doc
            .descendants()
            .filter(|n| n.attribute("class") == Some("ref"))
            .collect::<Vec<_>>();
        assert_eq!(refs.len(), 1);
        assert_eq!(refs[0].attribute("y1"), refs[0].attribute("y2"));
        assert_eq!(count(&doc, "polyline"), 1);
    }

    #[test]
    fn scatter_point_count() {
        let pts: Vec<(f64, f64)> = (0..800).map(|i| (i as f64, (i as f64).sin())).collect();
        let doc_src = render(&PlotSpec::new(PlotKind::Scatter, "s", "x", "y").with_series("q", pts)).svg;
        assert_eq!(count(&parse(&doc_src), "circle"), 800);
    }

    #[test]
    fn non_finite_points_dropped() {
        let spec = PlotSpec::new(PlotKind::Scatter, "s", "x", "y")
            .with_series("q", vec![(0.0, 1.0), (f64::NAN, 1.0), (1.0, f64::INFINITY), (2.0, 2.0)]);
        let r = render(&spec);
        assert_eq!(r.dropped, 2);
        assert_eq!(count(&parse(&r.svg), "circle"), 2);
    }

    #[test]
    fn labels_are_escaped() {
        let spec = PlotSpec::new(PlotKind::Line, "a < b & c", "\"x\"", "y'");
        let svg = render(&spec).svg;
        let doc = parse(&svg);
        assert!(doc.descendants().any(|n| n.text() == Some("a < b & c")));
    }

    #[test]
    fn degenerate_ranges() {
        let spec = PlotSpec::new(PlotKind::Scatter, "s", "x", "y").with_series("q", vec![(3.0, 3.0)]);
        let r = render(&spec);
        assert!(!r.svg.contains("NaN") && !r.svg.contains("inf"));
        parse(&r.svg);
    }

    #[test]
    fn tick_labels() {
        assert_eq!(tick_label(0.0), "0");
        assert_eq!(tick_label(0.5), "0.5");
        assert_eq!(tick_label(-1.0), "-1");
        assert_eq!(tick_label(1e-9), "1.00e-9");
    }
}
