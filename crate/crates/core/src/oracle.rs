//! Variational checks on geodesic projections: first-order stationarity of
//! Finsler length under area-preserving perturbations, and a direct
//! minimization of length at fixed enclosed area.

use std::f64::consts::TAU;
use std::fmt::Write as _;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::geodesics::{projection_closure, GeodesicTrace};
use crate::indicatrix::{finsler_norm, IndicatrixProfile};

/// A polygonal horizontal curve, given by its projection to the xy-plane.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DiscreteHorizontalPath {
    pub nodes: Vec<[f64; 2]>,
    /// The last node joins back to the first.
    pub closed: bool,
}

impl DiscreteHorizontalPath {
    pub fn new(nodes: Vec<[f64; 2]>, closed: bool) -> Self {
        DiscreteHorizontalPath { nodes, closed }
    }

    fn segments(&self) -> impl Iterator<Item = (usize, [f64; 2], [f64; 2])> + '_ {
        let n = self.nodes.len();
        let count = if self.closed && n > 1 { n } else { n.saturating_sub(1) };
        (0..count).map(move |i| (i, self.nodes[i], self.nodes[(i + 1) % n]))
    }

    /// `½ Σ (xᵢ yᵢ₊₁ − xᵢ₊₁ yᵢ)` over the segments; positive for
    /// counter-clockwise loops.
    pub fn signed_area(&self) -> f64 {
        self.segments().map(|(_, p, q)| 0.5 * (p[0] * q[1] - q[0] * p[1])).sum()
    }

    /// Heights of the horizontal lift through `z = 0` at the first node,
    /// from `dz = −½(x dy − y dx)`. For a closed path there is one extra
    /// entry: the height after returning to the first node.
    pub fn z_lift(&self) -> Vec<f64> {
        let mut z = vec![0.0];
        for (_, p, q) in self.segments() {
            let last = *z.last().unwrap_or(&0.0);
            z.push(last - 0.5 * (p[0] * q[1] - q[0] * p[1]));
        }
        z
    }

    pub fn euclidean_length(&self) -> f64 {
        self.segments().map(|(_, p, q)| (q[0] - p[0]).hypot(q[1] - p[1])).sum()
    }

    /// Area centroid of a closed path; vertex mean otherwise.
    pub fn centroid(&self) -> [f64; 2] {
        let a = self.signed_area();
        if self.closed && a != 0.0 {
            let (mut cx, mut cy) = (0.0, 0.0);
            for (_, p, q) in self.segments() {
                let cross = p[0] * q[1] - q[0] * p[1];
                cx += (p[0] + q[0]) * cross;
                cy += (p[1] + q[1]) * cross;
            }
            [cx / (6.0 * a), cy / (6.0 * a)]
        } else {
            let n = self.nodes.len().max(1) as f64;
            let s = self.nodes.iter().fold([0.0, 0.0], |acc, p| [acc[0] + p[0], acc[1] + p[1]]);
            [s[0] / n, s[1] / n]
        }
    }

    pub fn translated(&self, by: [f64; 2]) -> Self {
        let nodes = self.nodes.iter().map(|p| [p[0] + by[0], p[1] + by[1]]).collect();
        DiscreteHorizontalPath { nodes, closed: self.closed }
    }

    fn scaled_about(&self, center: [f64; 2], f: f64) -> Self {
        let nodes = self
            .nodes
            .iter()
            .map(|p| [center[0] + f * (p[0] - center[0]), center[1] + f * (p[1] - center[1])])
            .collect();
        DiscreteHorizontalPath { nodes, closed: self.closed }
    }

    /// CSV with header `x,y`.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("x,y\n");
        for p in &self.nodes {
            let _ = writeln!(out, "{:.9e},{:.9e}", p[0], p[1]);
        }
        out
    }
}

/// Finsler length `Σ |Δp| r(ψ)` of a polygonal path, `ψ` the direction of
/// each segment. Exact for polygons.
pub fn finsler_length(profile: &IndicatrixProfile, path: &DiscreteHorizontalPath) -> Result<f64> {
    let mut total = 0.0;
    for (i, p, q) in path.segments() {
        let v = [q[0] - p[0], q[1] - p[1]];
        if v[0] == 0.0 && v[1] == 0.0 {
            return Err(Error::DegenerateSegment { index: i });
        }
        total += finsler_norm(profile, v);
    }
    Ok(total)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StationarityReport {
    /// Largest `|L(+ε) − L(−ε)| / (2ε)` over the perturbations.
    pub max_first_order_defect: f64,
    pub defects: Vec<f64>,
}

/// Number of nodes used to sample a closed geodesic projection.
pub const PROJECTION_NODES: usize = 1024;

/// Samples one period of the closed projection of `trace` at `nodes`
/// equally spaced arc-length values.
pub fn closed_projection(trace: &GeodesicTrace, nodes: usize) -> Result<DiscreteHorizontalPath> {
    let closure = match projection_closure(trace) {
        Ok(c) => c,
        Err(Error::InsufficientTrace(_)) => return Err(Error::NotClosed),
        Err(e) => return Err(e),
    };
    if !closure.closes {
        return Err(Error::NotClosed);
    }
    let s0 = trace.samples[0].s;
    let pts = (0..nodes)
        .map(|k| {
            let st = trace.state_at(s0 + closure.period_arclength * k as f64 / nodes as f64)?;
            Ok([st.x, st.y])
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(DiscreteHorizontalPath::new(pts, true))
}

/// First-order stationarity of the Finsler length of the closed projection
/// of `trace` under random area-preserving normal perturbations.
pub fn dido_stationarity(
    profile: &IndicatrixProfile,
    trace: &GeodesicTrace,
    perturbation_count: usize,
    epsilon: f64,
    seed: u64,
) -> Result<StationarityReport> {
    if *profile != trace.profile {
        return Err(Error::ProfileMismatch);
    }
    let path = closed_projection(trace, PROJECTION_NODES)?;
    dido_stationarity_path(profile, &path, perturbation_count, epsilon, seed)
}

/// As [`dido_stationarity`], for an arbitrary closed polygon.
///
/// Each perturbation is a normal displacement `ε η n` with `η` a random
/// combination of Fourier modes 2 to 5 in the normalized arc length,
/// `max |η| = 1`, and its arc-length mean removed. The perturbed loop is then
/// scaled about its centroid to the original area.
pub fn dido_stationarity_path(
    profile: &IndicatrixProfile,
    path: &DiscreteHorizontalPath,
    perturbation_count: usize,
    epsilon: f64,
    seed: u64,
) -> Result<StationarityReport> {
    if !path.closed || path.nodes.len() < 8 {
        return Err(Error::NotClosed);
    }
    if epsilon.is_nan() || epsilon <= 0.0 || perturbation_count == 0 {
        return Err(Error::InvalidArgument("need epsilon > 0 and at least one perturbation".into()));
    }
    let n = path.nodes.len();
    let p = &path.nodes;
    let area = path.signed_area();
    let seg = |i: usize| {
        let (a, b) = (p[i], p[(i + 1) % n]);
        (b[0] - a[0]).hypot(b[1] - a[1])
    };
    // node weights, cumulative arc length and unit normals
    let weights: Vec<f64> = (0..n).map(|i| 0.5 * (seg((i + n - 1) % n) + seg(i))).collect();
    let total: f64 = (0..n).map(seg).sum();
    let mut sigma = vec![0.0; n];
    for i in 1..n {
        sigma[i] = sigma[i - 1] + seg(i - 1) / total;
    }
    let normals: Vec<[f64; 2]> = (0..n)
        .map(|i| {
            let (a, b) = (p[(i + n - 1) % n], p[(i + 1) % n]);
            let (tx, ty) = (b[0] - a[0], b[1] - a[1]);
            let len = tx.hypot(ty);
            [ty / len, -tx / len]
        })
        .collect();

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut defects = Vec::with_capacity(perturbation_count);
    for _ in 0..perturbation_count {
        let coeffs: Vec<(f64, f64)> = (2..=5).map(|_| (rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0))).collect();
        let mut eta: Vec<f64> = sigma
            .iter()
            .map(|&t| {
                coeffs
                    .iter()
                    .enumerate()
                    .map(|(j, (a, b))| {
                        let m = (j + 2) as f64;
                        a * (TAU * m * t).cos() + b * (TAU * m * t).sin()
                    })
                    .sum()
            })
            .collect();
        let wsum: f64 = weights.iter().sum();
        let mean = eta.iter().zip(&weights).map(|(e, w)| e * w).sum::<f64>() / wsum;
        eta.iter_mut().for_each(|e| *e -= mean);
        let peak = eta.iter().fold(0.0_f64, |m, e| m.max(e.abs()));
        if peak == 0.0 {
            continue;
        }
        eta.iter_mut().for_each(|e| *e /= peak);

        let perturbed_length = |sign: f64| -> Result<f64> {
            let nodes = (0..n)
                .map(|i| {
                    let d = sign * epsilon * eta[i];
                    [p[i][0] + d * normals[i][0], p[i][1] + d * normals[i][1]]
                })
                .collect();
            let q = DiscreteHorizontalPath::new(nodes, true);
            let q = q.scaled_about(q.centroid(), (area / q.signed_area()).sqrt());
            finsler_length(profile, &q)
        };
        let (lp, lm) = (perturbed_length(1.0)?, perturbed_length(-1.0)?);
        defects.push((lp - lm).abs() / (2.0 * epsilon));
    }
    Ok(StationarityReport { max_first_order_defect: defects.iter().fold(0.0, |m: f64, d| m.max(*d)), defects })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Orientation {
    /// The sense traced by geodesics with `λ₀ > 0`.
    Clockwise,
    CounterClockwise,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DirectSearchOptions {
    pub orientation: Orientation,
    pub max_iterations: usize,
    /// Stop when the squared projected gradient drops below
    /// `tolerance · L²`.
    pub tolerance: f64,
    /// Stop when the length decreased by less than `stall · L` over the
    /// last `STALL_WINDOW` iterations.
    pub stall: f64,
    /// Finite-difference step for the length gradient.
    pub fd_step: f64,
}

impl Default for DirectSearchOptions {
    fn default() -> Self {
        DirectSearchOptions { orientation: Orientation::Clockwise, max_iterations: 20_000, tolerance: 1e-22, stall: 1e-10, fd_step: 1e-6 }
    }
}

const STALL_WINDOW: usize = 50;

/// Solves `(1 + 2α) xᵢ − α (xᵢ₋₁ + xᵢ₊₁) = bᵢ` with cyclic indices.
fn solve_cyclic(alpha: f64, b: &[f64]) -> Vec<f64> {
    let n = b.len();
    let diag = 1.0 + 2.0 * alpha;
    let off = -alpha;
    // Sherman–Morrison on the tridiagonal part.
    let gamma = -diag;
    let mut bb = vec![diag; n];
    bb[0] = diag - gamma;
    bb[n - 1] = diag - off * off / gamma;
    let thomas = |rhs: &[f64]| -> Vec<f64> {
        let mut c = vec![0.0; n];
        let mut d = vec![0.0; n];
        c[0] = off / bb[0];
        d[0] = rhs[0] / bb[0];
        for i in 1..n {
            let m = bb[i] - off * c[i - 1];
            c[i] = off / m;
            d[i] = (rhs[i] - off * d[i - 1]) / m;
        }
        let mut x = vec![0.0; n];
        x[n - 1] = d[n - 1];
        for i in (0..n - 1).rev() {
            x[i] = d[i] - c[i] * x[i + 1];
        }
        x
    };
    let x = thomas(b);
    let mut u = vec![0.0; n];
    u[0] = gamma;
    u[n - 1] = off;
    let z = thomas(&u);
    let fact = (x[0] + off * x[n - 1] / gamma) / (1.0 + z[0] + off * z[n - 1] / gamma);
    x.iter().zip(&z).map(|(xi, zi)| xi - fact * zi).collect()
}

/// Minimizes Finsler length over closed polygons of `node_count` nodes with
/// enclosed area `target_area`, starting from a circle.
pub fn dido_direct_search(profile: &IndicatrixProfile, target_area: f64, node_count: usize) -> Result<DiscreteHorizontalPath> {
    dido_direct_search_with(profile, target_area, node_count, &DirectSearchOptions::default())
}

/// Descent uses finite-difference length gradients, smoothed by the cyclic
/// operator `1 − α Δ` with `α = (N/2π)²` so that all Fourier modes of the
/// loop relax at comparable rates. The area gradient is projected out of
/// each step, the area is restored by scaling about the centroid, and the
/// step length is chosen by backtracking.
pub fn dido_direct_search_with(
    profile: &IndicatrixProfile,
    target_area: f64,
    node_count: usize,
    options: &DirectSearchOptions,
) -> Result<DiscreteHorizontalPath> {
    profile.validate()?;
    if !(target_area > 0.0 && target_area.is_finite()) {
        return Err(Error::InvalidArgument(format!("target area {target_area} must be positive")));
    }
    if node_count < 32 {
        return Err(Error::InvalidArgument(format!("node_count {node_count} < 32")));
    }
    let n = node_count;
    let sign = match options.orientation {
        Orientation::Clockwise => -1.0,
        Orientation::CounterClockwise => 1.0,
    };
    let radius = (2.0 * target_area / (n as f64 * (TAU / n as f64).sin())).sqrt();
    let circle = (0..n)
        .map(|i| {
            let a = TAU * i as f64 / n as f64;
            [radius * a.cos(), sign * radius * a.sin()]
        })
        .collect();
    descend(profile, DiscreteHorizontalPath::new(circle, true), options)
}

/// As [`dido_direct_search_with`], starting from `initial` instead of a
/// circle. The signed area of `initial` is kept; `options.orientation` is
/// ignored.
pub fn dido_direct_search_from(
    profile: &IndicatrixProfile,
    initial: DiscreteHorizontalPath,
    options: &DirectSearchOptions,
) -> Result<DiscreteHorizontalPath> {
    profile.validate()?;
    if !initial.closed || initial.nodes.len() < 32 {
        return Err(Error::InvalidArgument("initial loop must be closed with at least 32 nodes".into()));
    }
    if initial.signed_area() == 0.0 {
        return Err(Error::InvalidArgument("initial loop encloses no area".into()));
    }
    descend(profile, initial, options)
}

fn descend(profile: &IndicatrixProfile, mut path: DiscreteHorizontalPath, options: &DirectSearchOptions) -> Result<DiscreteHorizontalPath> {
    let n = path.nodes.len();
    let signed_target = path.signed_area();
    let restore = |q: DiscreteHorizontalPath| {
        let a = q.signed_area();
        if a * signed_target <= 0.0 {
            return None;
        }
        Some(q.scaled_about(q.centroid(), (signed_target / a).sqrt()))
    };

    let alpha = (n as f64 / TAU).powi(2);
    let h = options.fd_step;
    let mut length = finsler_length(profile, &path)?;
    let mut step: f64 = 1e-2;
    let mut history = std::collections::VecDeque::with_capacity(STALL_WINDOW + 1);
    for _ in 0..options.max_iterations {
        history.push_back(length);
        if history.len() > STALL_WINDOW {
            let old = history.pop_front().unwrap_or(length);
            if old - length < options.stall * length {
                return Ok(path);
            }
        }
        let p = &path.nodes;
        let local = |i: usize, x: [f64; 2]| {
            let (a, b) = (p[(i + n - 1) % n], p[(i + 1) % n]);
            finsler_norm(profile, [x[0] - a[0], x[1] - a[1]]) + finsler_norm(profile, [b[0] - x[0], b[1] - x[1]])
        };
        let mut gx = vec![0.0; n];
        let mut gy = vec![0.0; n];
        for i in 0..n {
            let [x, y] = p[i];
            gx[i] = (local(i, [x + h, y]) - local(i, [x - h, y])) / (2.0 * h);
            gy[i] = (local(i, [x, y + h]) - local(i, [x, y - h])) / (2.0 * h);
        }
        let ax: Vec<f64> = (0..n).map(|i| 0.5 * (p[(i + 1) % n][1] - p[(i + n - 1) % n][1])).collect();
        let ay: Vec<f64> = (0..n).map(|i| 0.5 * (p[(i + n - 1) % n][0] - p[(i + 1) % n][0])).collect();
        let (mgx, mgy) = (solve_cyclic(alpha, &gx), solve_cyclic(alpha, &gy));
        let (max_, may) = (solve_cyclic(alpha, &ax), solve_cyclic(alpha, &ay));
        let dot = |u: &[f64], v: &[f64], w: &[f64], z: &[f64]| -> f64 {
            u.iter().zip(v).map(|(a, b)| a * b).sum::<f64>() + w.iter().zip(z).map(|(a, b)| a * b).sum::<f64>()
        };
        let a_mg = dot(&ax, &mgx, &ay, &mgy);
        let a_ma = dot(&ax, &max_, &ay, &may);
        let coef = a_mg / a_ma;
        let dx: Vec<f64> = mgx.iter().zip(&max_).map(|(g, a)| g - coef * a).collect();
        let dy: Vec<f64> = mgy.iter().zip(&may).map(|(g, a)| g - coef * a).collect();
        let slope = dot(&gx, &dx, &gy, &dy);
        if slope <= options.tolerance * length * length {
            return Ok(path);
        }

        step = (step * 2.0).min(1.0);
        let mut accepted = false;
        while step > 1e-14 {
            let trial = DiscreteHorizontalPath::new(
                (0..n).map(|i| [p[i][0] - step * dx[i], p[i][1] - step * dy[i]]).collect(),
                true,
            );
            if let Some(trial) = restore(trial) {
                if let Ok(l) = finsler_length(profile, &trial) {
                    if l <= length - 1e-4 * step * slope {
                        path = trial;
                        length = l;
                        accepted = true;
                        break;
                    }
                }
            }
            step *= 0.5;
        }
        if !accepted {
            // No descent left at round-off level.
            return Ok(path);
        }
    }
    Err(Error::NoConvergence { iterations: options.max_iterations, best: Box::new(path) })
}

fn point_segment_distance(p: [f64; 2], a: [f64; 2], b: [f64; 2]) -> f64 {
    let (vx, vy) = (b[0] - a[0], b[1] - a[1]);
    let len2 = vx * vx + vy * vy;
    let t = if len2 > 0.0 { (((p[0] - a[0]) * vx + (p[1] - a[1]) * vy) / len2).clamp(0.0, 1.0) } else { 0.0 };
    (p[0] - a[0] - t * vx).hypot(p[1] - a[1] - t * vy)
}

fn directed_hausdorff(a: &DiscreteHorizontalPath, b: &DiscreteHorizontalPath) -> f64 {
    a.nodes
        .iter()
        .map(|&p| b.segments().map(|(_, s, t)| point_segment_distance(p, s, t)).fold(f64::INFINITY, f64::min))
        .fold(0.0, f64::max)
}

/// Hausdorff distance between two polylines, using vertex-to-segment
/// distances in both directions.
pub fn hausdorff_distance(a: &DiscreteHorizontalPath, b: &DiscreteHorizontalPath) -> f64 {
    directed_hausdorff(a, b).max(directed_hausdorff(b, a))
}

/// Diameter of the node set.
pub fn path_diameter(path: &DiscreteHorizontalPath) -> f64 {
    crate::geodesics::planar_diameter(&path.nodes)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use std::f64::consts::PI;

    fn square() -> DiscreteHorizontalPath {
        DiscreteHorizontalPath::new(vec![[0.0, 0.0], [1.0, 0.0], [1.0, 1.0], [0.0, 1.0]], true)
    }

    fn circle(n: usize, r: f64) -> DiscreteHorizontalPath {
        DiscreteHorizontalPath::new((0..n).map(|i| {
            let a = TAU * i as f64 / n as f64;
            [r * a.cos(), r * a.sin()]
        }).collect(), true)
    }

    #[test]
    fn length_examples() {
        assert_eq!(finsler_length(&IndicatrixProfile::Flat, &square()).unwrap(), 4.0);
        let r = IndicatrixProfile::randers(0.5).unwrap();
        let fwd = DiscreteHorizontalPath::new(vec![[0.0, 0.0], [1.0, 0.0]], false);
        let back = DiscreteHorizontalPath::new(vec![[0.0, 0.0], [-1.0, 0.0]], false);
        assert_relative_eq!(finsler_length(&r, &fwd).unwrap(), 1.5, epsilon = 1e-15);
        assert_relative_eq!(finsler_length(&r, &back).unwrap(), 0.5, epsilon = 1e-15);
    }

    #[test]
    fn repeated_node_is_degenerate() {
        let p = DiscreteHorizontalPath::new(vec![[0.0, 0.0], [1.0, 0.0], [1.0, 0.0]], false);
        assert_eq!(finsler_length(&IndicatrixProfile::Flat, &p), Err(Error::DegenerateSegment { index: 1 }));
    }

    #[test]
    fn area_and_lift() {
        let sq = square();
        assert_eq!(sq.signed_area(), 1.0);
        let z = sq.z_lift();
        assert_eq!(z.len(), 5);
        assert_eq!(*z.last().unwrap(), -1.0);
        assert_eq!(sq.centroid(), [0.5, 0.5]);
    }

    #[test]
    fn cyclic_solver() {
        let b: Vec<f64> = (0..40).map(|i| (i as f64 * 0.37).sin() + 0.2).collect();
        let x = solve_cyclic(3.5, &b);
        let n = b.len();
        for i in 0..n {
            let lhs = 8.0 * x[i] - 3.5 * (x[(i + n - 1) % n] + x[(i + 1) % n]);
            assert!((lhs - b[i]).abs() < 1e-12);
        }
    }

    #[test]
    fn circle_is_stationary_ellipse_is_not() {
        let c = circle(1024, 1.0);
        let rep = dido_stationarity_path(&IndicatrixProfile::Flat, &c, 20, 1e-3, 7).unwrap();
        assert!(rep.max_first_order_defect < 1e-3, "{}", rep.max_first_order_defect);
        let e = DiscreteHorizontalPath::new(c.nodes.iter().map(|p| [2.0 * p[0], p[1]]).collect(), true);
        let rep = dido_stationarity_path(&IndicatrixProfile::Flat, &e, 20, 1e-3, 7).unwrap();
        assert!(rep.max_first_order_defect > 1e-2, "{}", rep.max_first_order_defect);
    }

    #[test]
    fn open_path_is_rejected() {
        let p = DiscreteHorizontalPath::new(circle(64, 1.0).nodes, false);
        assert_eq!(dido_stationarity_path(&IndicatrixProfile::Flat, &p, 3, 1e-3, 0), Err(Error::NotClosed));
    }

    #[test]
    fn flat_direct_search() {
        let loop_ = dido_direct_search(&IndicatrixProfile::Flat, PI, 128).unwrap();
        assert!(loop_.signed_area() < 0.0);
        assert_relative_eq!(loop_.signed_area(), -PI, epsilon = 1e-12);
        let len = finsler_length(&IndicatrixProfile::Flat, &loop_).unwrap();
        assert!((len - TAU).abs() < 1e-3);
        let unit = circle(128, 1.0);
        let d = hausdorff_distance(&loop_.translated({
            let c = loop_.centroid();
            [-c[0], -c[1]]
        }), &unit);
        assert!(d < 5e-3, "{d}");
    }

    #[test]
    fn search_validates_input() {
        assert!(dido_direct_search(&IndicatrixProfile::Flat, 1.0, 16).is_err());
        assert!(dido_direct_search(&IndicatrixProfile::Flat, -1.0, 64).is_err());
    }

    #[test]
    fn hausdorff_of_shifted_square() {
        let a = square();
        let b = a.translated([0.1, 0.0]);
        assert_relative_eq!(hausdorff_distance(&a, &b), 0.1, epsilon = 1e-15);
    }

    #[test]
    fn csv_output() {
        let s = square().to_csv();
        assert!(s.starts_with("x,y\n0.000000000e0,0.000000000e0\n1.000000000e0,"));
    }
}
