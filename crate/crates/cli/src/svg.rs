//! Minimal static SVG charts: polylines, quantile ribbons, stacked band
//! areas, and axis labels in a fixed viewport. Presentation only; NaN values
//! split a line into segments instead of being interpolated.

use std::fmt::Write;

const WIDTH: f64 = 900.0;
const HEIGHT: f64 = 420.0;
const LEFT: f64 = 64.0;
const RIGHT: f64 = 16.0;
const TOP: f64 = 40.0;
const BOTTOM: f64 = 52.0;

const COLORS: [&str; 6] = [
    "#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b",
];

pub struct SeriesLine<'a> {
    pub label: String,
    pub values: &'a [f64],
}

pub struct Ribbon {
    pub lo: Vec<f64>,
    pub hi: Vec<f64>,
}

struct Frame {
    y_min: f64,
    y_max: f64,
    points: usize,
}

impl Frame {
    fn x(&self, i: usize) -> f64 {
        let span = (self.points.max(2) - 1) as f64;
        LEFT + (WIDTH - LEFT - RIGHT) * i as f64 / span
    }

    fn y(&self, v: f64) -> f64 {
        let t = (v - self.y_min) / (self.y_max - self.y_min);
        HEIGHT - BOTTOM - (HEIGHT - TOP - BOTTOM) * t
    }
}

fn escape(text: &str) -> String {
    text.replace('&', "&amp;")
        .replace('<', "&lt;")
        .replace('>', "&gt;")
        .replace('"', "&quot;")
}

fn tick_step(range: f64) -> f64 {
    let raw = range / 5.0;
    let magnitude = 10f64.powf(raw.log10().floor());
    let normalized = raw / magnitude;
    let factor = if normalized <= 1.0 {
        1.0
    } else if normalized <= 2.0 {
        2.0
    } else if normalized <= 5.0 {
        5.0
    } else {
        10.0
    };
    factor * magnitude
}

fn frame(lines: &[SeriesLine], ribbon: Option<&Ribbon>) -> Frame {
    let mut min = f64::INFINITY;
    let mut max = f64::NEG_INFINITY;
    let mut points = 0usize;
    let mut take = |v: f64| {
        if v.is_finite() {
            min = min.min(v);
            max = max.max(v);
        }
    };
    for line in lines {
        points = points.max(line.values.len());
        line.values.iter().copied().for_each(&mut take);
    }
    if let Some(r) = ribbon {
        points = points.max(r.lo.len());
        r.lo.iter().chain(r.hi.iter()).copied().for_each(&mut take);
    }
    if !min.is_finite() || !max.is_finite() {
        (min, max) = (0.0, 1.0);
    }
    if max - min < 1e-12 {
        min -= 1.0;
        max += 1.0;
    }
    let pad = 0.05 * (max - min);
    Frame {
        y_min: min - pad,
        y_max: max + pad,
        points,
    }
}

fn open_svg(out: &mut String, title: &str) {
    write!(
        out,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}" font-family="sans-serif" font-size="12">"#
    )
    .unwrap();
    write!(
        out,
        r#"<rect width="{WIDTH}" height="{HEIGHT}" fill="white"/><text x="{}" y="22" text-anchor="middle" font-size="15">{}</text>"#,
        WIDTH / 2.0,
        escape(title)
    )
    .unwrap();
}

fn axes(out: &mut String, f: &Frame, x_labels: &[String]) {
    let x0 = LEFT;
    let x1 = WIDTH - RIGHT;
    let y0 = HEIGHT - BOTTOM;
    write!(
        out,
        r#"<line x1="{x0}" y1="{TOP}" x2="{x0}" y2="{y0}" stroke="black"/><line x1="{x0}" y1="{y0}" x2="{x1}" y2="{y0}" stroke="black"/>"#
    )
    .unwrap();

    let step = tick_step(f.y_max - f.y_min);
    let mut tick = step * (f.y_min / step).ceil();
    while tick <= f.y_max + 1e-12 {
        let y = f.y(tick);
        write!(
            out,
            r#"<line x1="{}" y1="{y:.2}" x2="{x0}" y2="{y:.2}" stroke="black"/><text x="{}" y="{:.2}" text-anchor="end">{}</text>"#,
            x0 - 4.0,
            x0 - 8.0,
            y + 4.0,
            format_tick(tick)
        )
        .unwrap();
        tick += step;
    }

    if !x_labels.is_empty() {
        let stride = x_labels.len().div_ceil(8);
        for (i, label) in x_labels.iter().enumerate().step_by(stride.max(1)) {
            let x = f.x(i);
            write!(
                out,
                r#"<line x1="{x:.2}" y1="{y0}" x2="{x:.2}" y2="{}" stroke="black"/><text x="{x:.2}" y="{}" text-anchor="middle">{}</text>"#,
                y0 + 4.0,
                y0 + 18.0,
                escape(label)
            )
            .unwrap();
        }
    }
    write!(
        out,
        r#"<text x="{}" y="{}" text-anchor="middle">date</text><text x="14" y="{}" text-anchor="middle" transform="rotate(-90 14 {})">percent</text>"#,
        (x0 + x1) / 2.0,
        HEIGHT - 12.0,
        (TOP + y0) / 2.0,
        (TOP + y0) / 2.0
    )
    .unwrap();
}

fn format_tick(v: f64) -> String {
    if v.abs() >= 100.0 || v == v.trunc() {
        format!("{v:.0}")
    } else {
        format!("{v:.2}")
    }
}

fn polyline_segments(out: &mut String, f: &Frame, values: &[f64], color: &str) {
    let mut segment = String::new();
    let mut count = 0usize;
    let flush = |seg: &mut String, n: &mut usize, out: &mut String| {
        if *n >= 2 {
            write!(
                out,
                r#"<polyline points="{}" fill="none" stroke="{color}" stroke-width="1.5"/>"#,
                seg.trim_end()
            )
            .unwrap();
        }
        seg.clear();
        *n = 0;
    };
    for (i, &v) in values.iter().enumerate() {
        if v.is_finite() {
            write!(segment, "{:.2},{:.2} ", f.x(i), f.y(v)).unwrap();
            count += 1;
        } else {
            flush(&mut segment, &mut count, out);
        }
    }
    flush(&mut segment, &mut count, out);
}

fn ribbon_polygon(out: &mut String, f: &Frame, lo: &[f64], hi: &[f64], color: &str) {
    // Contiguous runs where both edges are finite become one polygon each.
    let n = lo.len().min(hi.len());
    let mut start = None;
    for i in 0..=n {
        let ok = i < n && lo[i].is_finite() && hi[i].is_finite();
        match (ok, start) {
            (true, None) => start = Some(i),
            (false, Some(s)) if i - s >= 2 => {
                let mut points = String::new();
                for (j, &v) in lo[s..i].iter().enumerate() {
                    write!(points, "{:.2},{:.2} ", f.x(s + j), f.y(v)).unwrap();
                }
                for (j, &v) in hi[s..i].iter().enumerate().rev() {
                    write!(points, "{:.2},{:.2} ", f.x(s + j), f.y(v)).unwrap();
                }
                write!(
                    out,
                    r#"<polygon points="{}" fill="{color}" fill-opacity="0.2" stroke="none"/>"#,
                    points.trim_end()
                )
                .unwrap();
                start = None;
            }
            (false, Some(_)) => start = None,
            _ => {}
        }
    }
}

fn legend(out: &mut String, labels: &[&str]) {
    let mut x = LEFT + 8.0;
    for (i, label) in labels.iter().enumerate() {
        let color = COLORS[i % COLORS.len()];
        write!(
            out,
            r#"<rect x="{x:.2}" y="{}" width="10" height="10" fill="{color}"/><text x="{:.2}" y="{}">{}</text>"#,
            TOP - 6.0,
            x + 14.0,
            TOP + 3.0,
            escape(label)
        )
        .unwrap();
        x += 24.0 + 7.0 * label.len() as f64;
    }
}

/// Line chart of one or more series, with an optional quantile ribbon
/// behind the first series.
pub fn line_chart(
    title: &str,
    x_labels: &[String],
    lines: &[SeriesLine],
    ribbon: Option<&Ribbon>,
) -> String {
    let f = frame(lines, ribbon);
    let mut out = String::new();
    open_svg(&mut out, title);
    axes(&mut out, &f, x_labels);
    if let Some(r) = ribbon {
        ribbon_polygon(&mut out, &f, &r.lo, &r.hi, COLORS[0]);
    }
    for (i, line) in lines.iter().enumerate() {
        polyline_segments(&mut out, &f, line.values, COLORS[i % COLORS.len()]);
    }
    let labels: Vec<&str> = lines.iter().map(|l| l.label.as_str()).collect();
    legend(&mut out, &labels);
    out.push_str("</svg>\n");
    out
}

/// Stacked area chart: layers accumulate bottom-up, so the top edge is the
/// layer sum. Negative values are clamped to zero for display.
pub fn stacked_chart(title: &str, x_labels: &[String], layers: &[SeriesLine]) -> String {
    let points = layers.iter().map(|l| l.values.len()).max().unwrap_or(0);
    let mut cumulative = vec![0.0f64; points];
    let mut tops: Vec<Vec<f64>> = Vec::with_capacity(layers.len());
    for layer in layers {
        for (i, c) in cumulative.iter_mut().enumerate() {
            let v = layer.values.get(i).copied().unwrap_or(0.0);
            *c += if v.is_finite() { v.max(0.0) } else { 0.0 };
        }
        tops.push(cumulative.clone());
    }

    let total = SeriesLine {
        label: String::new(),
        values: &cumulative,
    };
    let mut f = frame(std::slice::from_ref(&total), None);
    f.y_min = f.y_min.min(0.0);
    f.points = points;

    let mut out = String::new();
    open_svg(&mut out, title);
    axes(&mut out, &f, x_labels);
    let zeros = vec![0.0f64; points];
    for (d, top) in tops.iter().enumerate() {
        let below = if d == 0 { &zeros } else { &tops[d - 1] };
        let color = COLORS[d % COLORS.len()];
        ribbon_polygon(&mut out, &f, below, top, color);
        polyline_segments(&mut out, &f, top, color);
    }
    let labels: Vec<&str> = layers.iter().map(|l| l.label.as_str()).collect();
    legend(&mut out, &labels);
    out.push_str("</svg>\n");
    out
}
