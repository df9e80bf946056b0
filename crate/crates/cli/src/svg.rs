//! Static SVG plots. Renderers take points parsed back from the CSV files,
//! so a plot can be regenerated bit for bit from the CSV alone.
//!
//! The viewport is 1000 × 1000 and coordinates are written with one decimal,
//! i.e. rounded to 1e−4 of the viewport. The 3D view is an orthographic
//! projection seen from azimuth 30° and elevation 20°.

use std::fmt::Write as _;

use crate::CliError;

const SIZE: f64 = 1000.0;
const MARGIN: f64 = 50.0;
const AZIMUTH_DEG: f64 = 30.0;
const ELEVATION_DEG: f64 = 20.0;
const PALETTE: [&str; 6] = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#17becf"];

#[derive(Debug, Clone, PartialEq)]
pub struct Curve {
    pub points: Vec<[f64; 3]>,
    pub closed: bool,
}

fn column(headers: &csv::StringRecord, name: &str) -> Result<usize, CliError> {
    headers
        .iter()
        .position(|h| h == name)
        .ok_or_else(|| CliError::Usage(format!("CSV has no column {name:?}")))
}

fn parse(text: &str, names: &[&str]) -> Result<Vec<Vec<f64>>, CliError> {
    let mut reader = csv::Reader::from_reader(text.as_bytes());
    let headers = reader.headers().map_err(|e| CliError::Usage(format!("CSV: {e}")))?.clone();
    let idx = names.iter().map(|n| column(&headers, n)).collect::<Result<Vec<_>, _>>()?;
    reader
        .records()
        .map(|rec| {
            let rec = rec.map_err(|e| CliError::Usage(format!("CSV: {e}")))?;
            idx.iter()
                .map(|&i| {
                    rec[i].trim().parse::<f64>().map_err(|e| CliError::Usage(format!("CSV value {:?}: {e}", &rec[i])))
                })
                .collect()
        })
        .collect()
}

/// `(x, y, z)` rows of a geodesic trace CSV.
pub fn parse_trace_csv(text: &str) -> Result<Curve, CliError> {
    let rows = parse(text, &["x", "y", "z"])?;
    Ok(Curve { points: rows.into_iter().map(|r| [r[0], r[1], r[2]]).collect(), closed: false })
}

/// A closed planar loop from an `x,y` CSV, placed at `z = 0`.
pub fn parse_loop_csv(text: &str) -> Result<Curve, CliError> {
    let rows = parse(text, &["x", "y"])?;
    Ok(Curve { points: rows.into_iter().map(|r| [r[0], r[1], 0.0]).collect(), closed: true })
}

struct Frame {
    min: [f64; 2],
    scale: f64,
    offset: [f64; 2],
}

impl Frame {
    fn fit(points: impl Iterator<Item = [f64; 2]>) -> Frame {
        let (mut lo, mut hi) = ([f64::INFINITY; 2], [f64::NEG_INFINITY; 2]);
        for p in points {
            for k in 0..2 {
                lo[k] = lo[k].min(p[k]);
                hi[k] = hi[k].max(p[k]);
            }
        }
        if !lo[0].is_finite() {
            lo = [-1.0; 2];
            hi = [1.0; 2];
        }
        let extent = (hi[0] - lo[0]).max(hi[1] - lo[1]).max(1e-12);
        let scale = (SIZE - 2.0 * MARGIN) / extent;
        let offset = [
            MARGIN + 0.5 * ((SIZE - 2.0 * MARGIN) - (hi[0] - lo[0]) * scale),
            MARGIN + 0.5 * ((SIZE - 2.0 * MARGIN) - (hi[1] - lo[1]) * scale),
        ];
        Frame { min: lo, scale, offset }
    }

    /// Viewport coordinates, y pointing down.
    fn map(&self, p: [f64; 2]) -> [f64; 2] {
        let u = self.offset[0] + (p[0] - self.min[0]) * self.scale;
        let v = self.offset[1] + (p[1] - self.min[1]) * self.scale;
        [u, SIZE - v]
    }
}

fn coord(v: f64) -> String {
    // One decimal is 1e−4 of the viewport; avoid printing "-0.0".
    let r = (v * 10.0).round() / 10.0;
    format!("{:.1}", if r == 0.0 { 0.0 } else { r })
}

fn polyline(out: &mut String, pts: &[[f64; 2]], closed: bool, stroke: &str, width: f64) {
    let tag = if closed { "polygon" } else { "polyline" };
    let list: Vec<String> = pts.iter().map(|p| format!("{},{}", coord(p[0]), coord(p[1]))).collect();
    let _ = writeln!(
        out,
        r#"<{tag} fill="none" stroke="{stroke}" stroke-width="{width}" points="{}"/>"#,
        list.join(" ")
    );
}

fn document(title: &str, body: &str) -> String {
    format!(
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{s}\" height=\"{s}\" viewBox=\"0 0 {s} {s}\">\n\
         <title>{title}</title>\n<rect width=\"{s}\" height=\"{s}\" fill=\"white\"/>\n{body}</svg>\n",
        s = SIZE
    )
}

/// Projection of the curves to the xy-plane, equal axis scales.
pub fn render_projection(title: &str, curves: &[Curve]) -> String {
    let planar: Vec<Vec<[f64; 2]>> = curves.iter().map(|c| c.points.iter().map(|p| [p[0], p[1]]).collect()).collect();
    let frame = Frame::fit(planar.iter().flatten().copied().chain([[0.0, 0.0]]));
    let mut body = String::new();
    let o = frame.map([0.0, 0.0]);
    let _ = writeln!(
        body,
        r##"<g stroke="#bbbbbb" stroke-width="1"><line x1="0" y1="{y}" x2="{s}" y2="{y}"/><line x1="{x}" y1="0" x2="{x}" y2="{s}"/></g>"##,
        x = coord(o[0]),
        y = coord(o[1]),
        s = SIZE
    );
    for (k, (c, pts)) in curves.iter().zip(&planar).enumerate() {
        let mapped: Vec<[f64; 2]> = pts.iter().map(|&p| frame.map(p)).collect();
        polyline(&mut body, &mapped, c.closed, PALETTE[k % PALETTE.len()], 2.0);
    }
    document(title, &body)
}

fn axonometric(p: [f64; 3]) -> [f64; 2] {
    let (sa, ca) = AZIMUTH_DEG.to_radians().sin_cos();
    let (se, ce) = ELEVATION_DEG.to_radians().sin_cos();
    let right = -p[0] * sa + p[1] * ca;
    let up = -se * (p[0] * ca + p[1] * sa) + ce * p[2];
    [right, up]
}

/// Orthographic 3D view with the coordinate axes through the origin.
pub fn render_axonometric(title: &str, curves: &[Curve]) -> String {
    let extent = curves
        .iter()
        .flat_map(|c| c.points.iter())
        .flat_map(|p| p.iter().map(|v| v.abs()))
        .fold(0.0_f64, f64::max)
        .max(1.0);
    let axes = [[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]].map(|e: [f64; 3]| e.map(|v| v * 0.5 * extent));
    let projected: Vec<Vec<[f64; 2]>> = curves.iter().map(|c| c.points.iter().map(|&p| axonometric(p)).collect()).collect();
    let frame = Frame::fit(
        projected
            .iter()
            .flatten()
            .copied()
            .chain(axes.iter().map(|&a| axonometric(a)))
            .chain([[0.0, 0.0]]),
    );
    let mut body = String::new();
    let o = frame.map([0.0, 0.0]);
    for (axis, name) in axes.iter().zip(["x", "y", "z"]) {
        let e = frame.map(axonometric(*axis));
        polyline(&mut body, &[o, e], false, "#888888", 1.0);
        let _ = writeln!(
            body,
            r##"<text x="{}" y="{}" font-family="sans-serif" font-size="20" fill="#555555">{name}</text>"##,
            coord(e[0] + 6.0),
            coord(e[1] - 6.0)
        );
    }
    for (k, (c, pts)) in curves.iter().zip(&projected).enumerate() {
        let mapped: Vec<[f64; 2]> = pts.iter().map(|&p| frame.map(p)).collect();
        polyline(&mut body, &mapped, c.closed, PALETTE[k % PALETTE.len()], 2.0);
    }
    document(title, &body)
}
