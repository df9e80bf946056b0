//! The Jacobi operator `J(u) = u⁗ + (P u̇)˙ + Q u` of the second variation,
//! conjugate points and variation fields.
//!
//! `P` and `Q` are evaluated from a full [`InvariantTable`]; on the
//! homogeneous structure every entry except `I` and its derivatives is zero.

use std::f64::consts::TAU;
use std::fmt::Write as _;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::geodesics::GeodesicTrace;
use crate::indicatrix::{evaluate_profile, require_convex, IndicatrixProfile};
use crate::invariants::{heisenberg_table_on_geodesic, InvariantTable};
use crate::ode;

/// `dλ/ds = λ² I + λ J₁ + A₂ + ½ I K` along a geodesic.
pub fn lambda_rate(t: &InvariantTable, l: f64) -> f64 {
    l * l * t.i + l * t.j1 + t.a2 + 0.5 * t.i * t.k
}

pub fn jacobi_p(t: &InvariantTable, l: f64) -> f64 {
    (2.0 * t.i * t.i + 4.0 * t.i_4 + 1.0) * l * l
        + 8.0 * (t.j1 * t.i + t.j2) * l
        + (2.0 * t.k * t.i * t.i + 4.0 * t.a2 * t.i + t.k - 3.0 * t.a1)
}

/// `dP/ds` by the chain rule through `λ` and the table entries.
pub fn jacobi_p_dot(t: &InvariantTable, l: f64) -> f64 {
    let dp_dl = 2.0 * (2.0 * t.i * t.i + 4.0 * t.i_4 + 1.0) * l + 8.0 * (t.j1 * t.i + t.j2);
    let dp_di = 4.0 * t.i * l * l + 8.0 * t.j1 * l + 4.0 * t.k * t.i + 4.0 * t.a2;
    dp_dl * lambda_rate(t, l)
        + dp_di * t.i_1
        + 4.0 * l * l * t.i_41
        + 8.0 * t.i * l * t.j1_1
        + 8.0 * l * t.j2_1
        + (2.0 * t.i * t.i + 1.0) * t.k_1
        + 4.0 * t.i * t.a2_1
        - 3.0 * t.a1_1
}

pub fn jacobi_q(t: &InvariantTable, l: f64) -> f64 {
    let InvariantTable {
        i,
        k,
        a1,
        a2,
        j1,
        j2,
        s0,
        s1,
        s2,
        i_3: i3,
        i_4: i4,
        i_41: i41,
        i_411: i411,
        j1_4: j14,
        j1_41: j141,
        j2_4: j24,
        j2_41: j241,
        a1_1: a11,
        a1_4: a14,
        a1_41: a141,
        a1_11: a111,
        a2_1: a21,
        a2_3: a23,
        a2_4: a24,
        a2_41: a241,
        a2_11: a211,
        k_1: k1,
        k_3: k3,
        k_11: k11,
        s0_1: s01,
        s0_4: s04,
        s2_1: s21,
        s2_4: s24,
        ..
    } = *t;
    let (i2, i3p, i4p) = (i * i, i * i * i, i * i * i * i);

    let c4 = 4.0 * i4p + 2.0 * (8.0 * i4 + 1.0) * i2 + (5.0 * i4 * i4 + i4);

    let c3 = 20.0 * j1 * i3p
        + (14.0 * j2 + 10.0 * j14) * i2
        + (40.0 * j1 * i4 + 6.0 * i41 + 4.0 * j1 + 8.0 * j24) * i
        + (12.0 * j2 * i4 + 6.0 * j14 * i4 + j2 + j14);

    let c2 = (3.0 * k - 8.0 * a1) * i4p - (10.0 * a2 + 16.0 * s0 + 4.0 * a14) * i3p
        + (16.0 * k * i4 - 10.0 * a1 * i4 - 19.0 * a1 + 8.0 * a24 + 40.0 * j1 * j1 + k) * i2
        + (5.0 * a2 * i4 - 4.0 * a14 * i4 - 16.0 * s0 * i4 + 42.0 * j1 * j2 + 18.0 * j1 * j14 + 2.0 * j141
            - 12.0 * a2
            - 6.5 * a14
            - 6.0 * s0)
            * i
        + (5.0 * k * i4 * i4 + 18.0 * j1 * j1 * i4 - 13.0 * a1 * i4 + 6.0 * a24 * i4 + 2.0 * k * i4
            + 6.0 * j1 * i41
            + i411
            + i3
            - 2.0 * a1
            + a24
            + 3.0 * j1 * j1
            + 8.0 * j2 * j2
            + 8.0 * j2 * j14
            + 10.0 * j1 * j24
            + 2.0 * j241
            + s04);

    let c1 = (12.0 * k * j1 - 20.0 * a1 * j1 - 2.0 * a11 + k1) * i3p
        + (4.0 * k * j14 - 9.0 * j1 * a14 - 2.0 * a21 - a141 - 14.0 * j1 * a2 - 12.0 * j2 * a1 + 9.0 * j2 * k
            - 36.0 * j1 * s0
            - 4.0 * s01)
            * i2
        + (20.0 * k * j1 * i4 + 4.0 * k1 * i4 + 4.0 * k * i41 + 7.0 * a2 * j14 + 4.0 * k * j24 + 16.0 * j1 * a24
            - 5.0 * j2 * a14
            - 3.0 * a11
            + 2.0 * a241
            + 1.5 * k1
            - 34.0 * a1 * j1
            - 4.0 * a2 * j2
            + 4.0 * k * j1
            + 24.0 * j1 * j1 * j1
            - 20.0 * j2 * s0
            + 2.0 * s2)
            * i
        + (14.0 * j1 * a2 * i4 + 4.0 * a21 * i4 + 8.0 * k * j2 * i4 + 5.0 * a2 * i41 + 7.0 * a2 * j24
            - 8.0 * j1 * a14
            + 8.0 * j2 * a24
            - 3.0 * a21
            - 2.0 * a141
            - 4.0 * s01
            + s24
            - 18.0 * a1 * j2
            - 13.0 * a2 * j1
            + 24.0 * j1 * j1 * j2
            + 2.5 * k * j2
            - 8.0 * j1 * s0
            - s1);

    let c0 = (0.75 * k * k - 3.0 * a1 * k) * i4p
        - (1.5 * k * a14 + 5.0 * a1 * a2 + 3.0 * a2 * k + 6.0 * k * s0) * i3p
        + (2.5 * k * k * i4 - 2.5 * a2 * a14 + 3.0 * k * a24 + 3.0 * j1 * k1 + 0.5 * k11 - 7.0 * a2 * a2 + k * k
            - 6.5 * a1 * k
            + 9.0 * k * j1 * j1
            - 10.0 * a2 * s0)
            * i2
        + (6.0 * a2 * k * i4 + 5.0 * a2 * a24 + 4.0 * j1 * a21 - 3.0 * k * a14 + a211 + 3.0 * j2 * k1 + 0.5 * k3
            - 11.0 * a1 * a2
            + 12.0 * a2 * j1 * j1
            - 3.0 * a2 * k
            + 11.0 * j1 * j2 * k
            - 3.5 * k * s0)
            * i
        + (3.0 * a2 * a2 * i4 + 0.5 * k * i3 - 5.0 * a2 * a14 + 4.0 * j2 * a21 + a23 - a111 - s21 + 2.0 * a1 * a1
            - 8.0 * a2 * a2
            + 12.0 * a2 * j1 * j2
            - 6.0 * a2 * s0
            + 2.0 * j2 * j2 * k
            + j1 * s2);

    let l2 = l * l;
    c4 * l2 * l2 + c3 * l2 * l + c2 * l2 + c1 * l + c0
}

/// `P`, `Ṗ`, `Q` at one point of a geodesic.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PointCoefficients {
    pub p: f64,
    pub p_dot: f64,
    pub q: f64,
}

fn point_coefficients(profile: &IndicatrixProfile, theta: f64, lambda: f64) -> Result<PointCoefficients> {
    let t = heisenberg_table_on_geodesic(profile, theta, lambda)?;
    Ok(PointCoefficients { p: jacobi_p(&t, lambda), p_dot: jacobi_p_dot(&t, lambda), q: jacobi_q(&t, lambda) })
}

/// Jacobi coefficients along one geodesic.
#[derive(Debug, Clone, Copy)]
pub struct JacobiCoefficients<'a> {
    pub trace: &'a GeodesicTrace,
}

pub fn jacobi_coefficients<'a>(profile: &IndicatrixProfile, trace: &'a GeodesicTrace) -> Result<JacobiCoefficients<'a>> {
    if *profile != trace.profile {
        return Err(Error::ProfileMismatch);
    }
    Ok(JacobiCoefficients { trace })
}

impl JacobiCoefficients<'_> {
    pub fn profile(&self) -> &IndicatrixProfile {
        &self.trace.profile
    }

    /// Coefficients at arc length `s`, from the dense output of the trace.
    pub fn at(&self, s: f64) -> Result<PointCoefficients> {
        let st = self.trace.state_at(s)?;
        point_coefficients(self.profile(), st.theta, st.lambda)
    }
}

/// `J(u)` at `s`, with `u = [u, u̇, ü, u⃛, u⁗]` at `s`.
pub fn jacobi_apply(coeffs: &JacobiCoefficients, u: &[f64; 5], s: f64) -> Result<f64> {
    let c = coeffs.at(s)?;
    Ok(u[4] + c.p * u[2] + c.p_dot * u[1] + c.q * u[0])
}

// θ, λ and two solutions (u, u̇, ü, u⃛) of J(u) = 0.
type ShootState = [f64; 10];

fn shoot_rhs(profile: &IndicatrixProfile, y: &ShootState) -> Result<ShootState> {
    let (theta, lambda) = (y[0], y[1]);
    let d = evaluate_profile(profile, theta);
    require_convex(theta, &d)?;
    let t = heisenberg_table_on_geodesic(profile, theta, lambda)?;
    let (p, p_dot, q) = (jacobi_p(&t, lambda), jacobi_p_dot(&t, lambda), jacobi_q(&t, lambda));
    let mut out = [0.0; 10];
    out[0] = (d.r / (d.r + d.r2)).sqrt() * lambda;
    out[1] = lambda_rate(&t, lambda);
    for base in [2, 6] {
        let u = &y[base..base + 4];
        out[base] = u[1];
        out[base + 1] = u[2];
        out[base + 2] = u[3];
        out[base + 3] = -p * u[2] - p_dot * u[1] - q * u[0];
    }
    Ok(out)
}

/// A sampled solution of `J(u) = 0` with cubic Hermite dense output.
#[derive(Debug, Clone)]
pub struct JacobiSolution {
    /// `(s, [u, u̇, ü, u⃛, u⁗])` at each step.
    pub samples: Vec<(f64, [f64; 5])>,
}

impl JacobiSolution {
    /// `[u, u̇, ü, u⃛, u⁗]` at `s`. Each of the first four comes from the
    /// Hermite interpolant of that derivative, with the next derivative as
    /// slope; `u⁗` is the derivative of the `u⃛` interpolant.
    pub fn at(&self, s: f64) -> Result<[f64; 5]> {
        let n = self.samples.len();
        if n < 2 || !(s >= self.samples[0].0 && s <= self.samples[n - 1].0) {
            return Err(Error::InvalidArgument(format!("s = {s} outside the solution interval")));
        }
        let k = self.samples.partition_point(|p| p.0 <= s).clamp(1, n - 1) - 1;
        let ((s0, a), (s1, b)) = (self.samples[k], self.samples[k + 1]);
        let h = s1 - s0;
        let t = (s - s0) / h;
        let (t2, t3) = (t * t, t * t * t);
        let mut out = [0.0; 5];
        for j in 0..4 {
            out[j] = (2.0 * t3 - 3.0 * t2 + 1.0) * a[j]
                + (t3 - 2.0 * t2 + t) * h * a[j + 1]
                + (-2.0 * t3 + 3.0 * t2) * b[j]
                + (t3 - t2) * h * b[j + 1];
        }
        out[4] = ((6.0 * t2 - 6.0 * t) * a[3]
            + (3.0 * t2 - 4.0 * t + 1.0) * h * a[4]
            + (-6.0 * t2 + 6.0 * t) * b[3]
            + (3.0 * t2 - 2.0 * t) * h * b[4])
            / h;
        Ok(out)
    }
}

/// Integrates `J(u) = 0` with `u(0) = u̇(0) = 0`, `ü(0) = initial[0]`,
/// `u⃛(0) = initial[1]` by RK4 with step `step`, jointly with `θ` and `λ`
/// from the start of the trace.
pub fn solve_kernel(coeffs: &JacobiCoefficients, initial: [f64; 2], length: f64, step: f64) -> Result<JacobiSolution> {
    if !(step > 0.0 && length > 0.0) {
        return Err(Error::InvalidArgument("step and length must be positive".into()));
    }
    let profile = coeffs.profile();
    let start = coeffs.trace.initial;
    let mut y: ShootState = [0.0; 10];
    y[0] = start.theta;
    y[1] = start.lambda;
    y[4] = initial[0];
    y[5] = initial[1];
    let mut f = |_s: f64, y: &ShootState| shoot_rhs(profile, y);
    let full = |y: &ShootState, f: &mut dyn FnMut(f64, &ShootState) -> Result<ShootState>| -> Result<[f64; 5]> {
        let d = f(0.0, y)?;
        Ok([y[2], y[3], y[4], y[5], d[5]])
    };
    let n = (length / step).ceil() as usize;
    let mut samples = vec![(start.s, full(&y, &mut f)?)];
    let mut s = 0.0;
    for i in 0..n {
        let next = if i + 1 == n { length } else { (i + 1) as f64 * step };
        y = ode::rk4_step(&mut f, s, &y, next - s)?;
        s = next;
        samples.push((start.s + s, full(&y, &mut f)?));
    }
    Ok(JacobiSolution { samples })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ConjugatePoint {
    pub c: f64,
    pub multiplicity: u8,
}

const SAMPLES_PER_WINDOW: f64 = 2048.0;
const MAX_REFINEMENT_ROUNDS: u32 = 4;
const RANK_TOL: f64 = 1e-8;

struct Shooter<'a> {
    profile: &'a IndicatrixProfile,
    grid: Vec<(f64, ShootState)>,
}

impl Shooter<'_> {
    /// State at `s`, integrated from the nearest grid point at or below it.
    fn state(&self, s: f64) -> Result<ShootState> {
        let k = self.grid.partition_point(|g| g.0 <= s).max(1) - 1;
        let (s0, y0) = self.grid[k];
        if s == s0 {
            return Ok(y0);
        }
        let mut f = |_s: f64, y: &ShootState| shoot_rhs(self.profile, y);
        ode::rk4_step(&mut f, s0, &y0, s - s0)
    }

    fn wronskian(&self, s: f64) -> Result<f64> {
        Ok(wronskian(&self.state(s)?))
    }
}

fn wronskian(y: &ShootState) -> f64 {
    y[2] * y[7] - y[6] * y[3]
}

fn frobenius_sq(y: &ShootState) -> f64 {
    y[2] * y[2] + y[3] * y[3] + y[6] * y[6] + y[7] * y[7]
}

/// Singular values of `[[u_a, u_b], [u̇_a, u̇_b]]`, largest first.
fn singular_values(y: &ShootState) -> (f64, f64) {
    let (a, b, c, d) = (y[2], y[6], y[3], y[7]);
    let fro = a * a + b * b + c * c + d * d;
    let det = (a * d - b * c).abs();
    let disc = (fro * fro - 4.0 * det * det).max(0.0).sqrt();
    let s1 = (0.5 * (fro + disc)).sqrt();
    let s2 = if s1 > 0.0 { det / s1 } else { 0.0 };
    (s1, s2)
}

fn bisect(sh: &Shooter, mut lo: f64, mut hi: f64, mut w_lo: f64) -> Result<f64> {
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        let w = sh.wronskian(mid)?;
        if w == 0.0 {
            return Ok(mid);
        }
        if (w > 0.0) == (w_lo > 0.0) {
            lo = mid;
            w_lo = w;
        } else {
            hi = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}

fn golden_min_abs(sh: &Shooter, mut a: f64, mut b: f64) -> Result<(f64, f64)> {
    let g = 0.5 * (5.0_f64.sqrt() - 1.0);
    let mut c = b - g * (b - a);
    let mut d = a + g * (b - a);
    let (mut fc, mut fd) = (sh.wronskian(c)?.abs(), sh.wronskian(d)?.abs());
    for _ in 0..100 {
        if fc < fd {
            b = d;
            d = c;
            fd = fc;
            c = b - g * (b - a);
            fc = sh.wronskian(c)?.abs();
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + g * (b - a);
            fd = sh.wronskian(d)?.abs();
        }
    }
    let x = 0.5 * (a + b);
    Ok((x, sh.wronskian(x)?))
}

/// Conjugate points in `(0, length)`: zeros of the Wronskian
/// `W(c) = u_a(c) u̇_b(c) − u_b(c) u̇_a(c)` of the solutions of `J(u) = 0`
/// with `(ü, u⃛)(0) = (1, 0)` and `(0, 1)`.
///
/// `W` is sampled 2048 times per `2π/|λ₀|` of arc length. Sign changes are
/// refined by bisection; sampled local minima of `|W|` without a sign change
/// are resampled up to four times and accepted as tangential zeros when
/// `|W|` falls below `1e−8` of the running scale of `‖M‖²`. The
/// multiplicity is 2 when the largest singular value of `M` is below `1e−8`
/// times the running scale of `‖M‖`.
pub fn conjugate_points(coeffs: &JacobiCoefficients, length: f64) -> Result<Vec<ConjugatePoint>> {
    if !(length > 0.0 && length.is_finite()) {
        return Err(Error::InvalidArgument(format!("length {length} must be positive")));
    }
    let profile = coeffs.profile();
    let start = coeffs.trace.initial;
    let window = if start.lambda != 0.0 { TAU / start.lambda.abs() } else { length };
    let h = (window / SAMPLES_PER_WINDOW).min(length / 256.0).min(1e-2);
    let n = (length / h).ceil() as usize;
    if n > 50_000_000 {
        return Err(Error::InvalidArgument("conjugate-point search needs too many samples".into()));
    }

    let mut y: ShootState = [0.0; 10];
    y[0] = start.theta;
    y[1] = start.lambda;
    y[4] = 1.0;
    y[9] = 1.0;
    let mut f = |_s: f64, y: &ShootState| shoot_rhs(profile, y);
    let mut grid = Vec::with_capacity(n + 1);
    grid.push((0.0, y));
    for i in 0..n {
        let s0 = i as f64 * h;
        let s1 = if i + 1 == n { length } else { (i + 1) as f64 * h };
        y = ode::rk4_step(&mut f, s0, &y, s1 - s0)?;
        grid.push((s1, y));
    }
    let sh = Shooter { profile, grid };
    let w: Vec<f64> = sh.grid.iter().map(|g| wronskian(&g.1)).collect();
    if let Some(k) = w.iter().position(|v| !v.is_finite()) {
        return Err(Error::RootIsolationFailure { near: sh.grid[k].0 });
    }
    // Running scale of ‖M‖² up to each grid point.
    let mut scale = Vec::with_capacity(w.len());
    let mut running = 0.0_f64;
    for g in &sh.grid {
        running = running.max(frobenius_sq(&g.1));
        scale.push(running);
    }

    let mut roots: Vec<f64> = Vec::new();
    for k in 1..w.len() {
        let (s0, s1) = (sh.grid[k - 1].0, sh.grid[k].0);
        if w[k] == 0.0 {
            if k + 1 < w.len() {
                roots.push(s1);
            }
            continue;
        }
        if w[k - 1] != 0.0 && (w[k - 1] > 0.0) != (w[k] > 0.0) {
            roots.push(bisect(&sh, s0, s1, w[k - 1])?);
            continue;
        }
        // interior local minimum of |W| with no sign change around it
        if k + 1 < w.len()
            && w[k].abs() <= w[k - 1].abs()
            && w[k].abs() <= w[k + 1].abs()
            && (w[k] > 0.0) == (w[k + 1] > 0.0)
            && w[k].abs() < 1e-3 * scale[k]
        {
            let (a, b) = (s0, sh.grid[k + 1].0);
            let mut found = false;
            for round in 1..=MAX_REFINEMENT_ROUNDS {
                let m = 1usize << (round + 2);
                let pts: Vec<(f64, f64)> = (0..=m)
                    .map(|j| {
                        let s = a + (b - a) * j as f64 / m as f64;
                        sh.wronskian(s).map(|v| (s, v))
                    })
                    .collect::<Result<_>>()?;
                for pair in pts.windows(2) {
                    let ((p, wp), (q, wq)) = (pair[0], pair[1]);
                    if wp != 0.0 && wq != 0.0 && (wp > 0.0) != (wq > 0.0) {
                        roots.push(bisect(&sh, p, q, wp)?);
                        found = true;
                    }
                }
                if found {
                    break;
                }
            }
            if !found {
                let (x, wx) = golden_min_abs(&sh, a, b)?;
                let rel = wx.abs() / scale[k].max(f64::MIN_POSITIVE);
                if rel < RANK_TOL {
                    roots.push(x);
                } else if rel < 10.0 * RANK_TOL {
                    return Err(Error::RootIsolationFailure { near: x });
                }
            }
        }
    }
    roots.sort_by(f64::total_cmp);
    roots.dedup_by(|a, b| (*a - *b).abs() < 1e-9 * (1.0 + b.abs()));

    roots
        .into_iter()
        .filter(|&c| c > 0.0 && c < length)
        .map(|c| {
            let st = sh.state(c)?;
            let k = sh.grid.partition_point(|g| g.0 <= c).max(1) - 1;
            let (s1, _) = singular_values(&st);
            let multiplicity = if s1 <= RANK_TOL * scale[k].sqrt() { 2 } else { 1 };
            Ok(ConjugatePoint { c, multiplicity })
        })
        .collect()
}

/// Number of conjugate points in `(0, length)`, counted with multiplicity.
pub fn index(coeffs: &JacobiCoefficients, length: f64) -> Result<u32> {
    Ok(conjugate_points(coeffs, length)?.iter().map(|p| p.multiplicity as u32).sum())
}

pub fn conjugate_points_csv(points: &[ConjugatePoint]) -> String {
    let mut out = String::from("c,multiplicity\n");
    for p in points {
        let _ = writeln!(out, "{:.9e},{}", p.c, p.multiplicity);
    }
    out
}

/// `[V₁, …, V₅]` from `V₃` and its first three derivatives, given the
/// invariant table at the point and the multiplier `λ`.
pub fn variation_from_table(t: &InvariantTable, l: f64, v3: [f64; 4]) -> [f64; 5] {
    let [v, dv, ddv, dddv] = v3;
    let i = t.i;
    let (i2, i3) = (i * i, i * i * i);
    let l2 = l * l;
    let v1 = -l * v;
    let v2 = dv + i * l * v;
    let v4 = -ddv - 2.0 * i * l * dv
        + (-(2.0 * i2 + t.i_4) * l2 - (2.0 * i * t.j1 + 2.0 * t.j2) * l + (t.a1 - i * t.a2 - 0.5 * i2 * t.k)) * v;
    let c3 = -(4.0 * i3 + 6.0 * i * t.i_4 + i);
    let c2 = -(12.0 * i2 * t.j1 + 5.0 * t.i_4 * t.j1 + t.i_41 + 2.0 * i * t.j1_4 + 8.0 * i * t.j2 + 2.0 * t.j2_4 + t.j1);
    let c1 = -3.0 * i * t.k * t.i_4 - 3.0 * t.a2 * t.i_4 + 2.0 * t.a1_4 + i2 * t.a1_4 - 2.0 * i * t.a2_4
        + 4.0 * t.a1 * i
        + 2.0 * i3 * t.a1
        + 3.0 * t.a2
        - 2.0 * i3 * t.k
        - 8.0 * i * t.j1 * t.j1
        - 8.0 * t.j1 * t.j2
        - 1.5 * i * t.k
        + 3.0 * t.s0
        + 4.0 * i2 * t.s0;
    let c0 = t.a1_1 - i * t.a2_1 - 0.5 * i2 * t.k_1 + t.a1 * t.j1 - 4.0 * i * t.a2 * t.j1 - 3.0 * t.a2 * t.j2
        - 2.5 * i2 * t.j1 * t.k
        - 2.0 * i * t.j2 * t.k
        + t.s2;
    let v5 = -dddv - (2.0 * i * l + t.j1) * ddv
        + (-(4.0 * i2 + 3.0 * t.i_4 + 1.0) * l2 - (8.0 * i * t.j1 + 6.0 * t.j2) * l
            + (t.a1 - 3.0 * i * t.a2 - 1.5 * i2 * t.k - t.k))
            * dv
        + (c3 * l2 * l + c2 * l2 + c1 * l + c0) * v;
    [v1, v2, v, v4, v5]
}

/// Right-hand sides of `V̇₁, V̇₂, V̇₃, V̇₄` for the field `v`.
pub fn variation_rates(t: &InvariantTable, l: f64, v: &[f64; 5]) -> [f64; 4] {
    let [v1, v2, v3, v4, v5] = *v;
    let _ = v1;
    let half_ik = 0.5 * t.i * t.k;
    [
        -l * v2 - (t.j1 * l + t.a2 + half_ik) * v3,
        -t.i * l * v2 + (-t.j2 * l + t.a1) * v3 - v4,
        v2 - t.i * l * v3,
        (l * l + 2.0 * t.j2 * l + t.k) * v2 + (t.j1 * l * l + (t.a2 + half_ik - t.s0) * l - t.s2) * v3 - t.j1 * v4 + v5,
    ]
}

/// A variation field sampled at the trace's sample points.
#[derive(Debug, Clone, PartialEq)]
pub struct VariationField {
    pub s: Vec<f64>,
    /// `[V₁, V₂, V₃, V₄, V₅]` at each `s`.
    pub v: Vec<[f64; 5]>,
}

/// Variation field at arc length `s` whose `V₃` derivatives there are `v3`.
pub fn variation_at(trace: &GeodesicTrace, s: f64, v3: [f64; 4]) -> Result<[f64; 5]> {
    let st = trace.state_at(s)?;
    let t = heisenberg_table_on_geodesic(&trace.profile, st.theta, st.lambda)?;
    Ok(variation_from_table(&t, st.lambda, v3))
}

/// Rebuilds `V₁, V₂, V₄, V₅` from `V₃` along the trace. `v3(s)` returns
/// `[V₃, V̇₃, V̈₃, V⃛₃]`.
pub fn reconstruct_variation<F>(profile: &IndicatrixProfile, trace: &GeodesicTrace, v3: F) -> Result<VariationField>
where
    F: Fn(f64) -> [f64; 4],
{
    if *profile != trace.profile {
        return Err(Error::ProfileMismatch);
    }
    let mut field = VariationField { s: Vec::with_capacity(trace.samples.len()), v: Vec::with_capacity(trace.samples.len()) };
    for p in &trace.samples {
        let t = heisenberg_table_on_geodesic(profile, p.theta, p.lambda)?;
        field.s.push(p.s);
        field.v.push(variation_from_table(&t, p.lambda, v3(p.s)));
    }
    Ok(field)
}

/// Largest residual of the four variation ODEs at `s`, with `V̇ᵢ` from a
/// five-point difference of step `h`.
pub fn variation_residual<F>(trace: &GeodesicTrace, v3: F, s: f64, h: f64) -> Result<f64>
where
    F: Fn(f64) -> [f64; 4],
{
    let at = |x: f64| variation_at(trace, x, v3(x));
    let (m2, m1, p1, p2) = (at(s - 2.0 * h)?, at(s - h)?, at(s + h)?, at(s + 2.0 * h)?);
    let st = trace.state_at(s)?;
    let t = heisenberg_table_on_geodesic(&trace.profile, st.theta, st.lambda)?;
    let rates = variation_rates(&t, st.lambda, &at(s)?);
    Ok((0..4)
        .map(|j| {
            let d = (-p2[j] + 8.0 * p1[j] - 8.0 * m1[j] + m2[j]) / (12.0 * h);
            (d - rates[j]).abs()
        })
        .fold(0.0, f64::max))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geodesics::{integrate, GeodesicState, IntegratorSettings};
    use approx::assert_relative_eq;

    fn trace(profile: &IndicatrixProfile, theta: f64, lambda: f64, len: f64) -> GeodesicTrace {
        integrate(profile, GeodesicState::new(0.0, 0.0, 0.0, theta, lambda), &IntegratorSettings::fixed(1e-3, len)).unwrap()
    }

    #[test]
    fn flat_coefficients() {
        let t = trace(&IndicatrixProfile::Flat, 0.0, 1.0, 3.0);
        let c = jacobi_coefficients(&IndicatrixProfile::Flat, &t).unwrap();
        for s in [0.0, 1.1, 2.9] {
            assert_eq!(c.at(s).unwrap(), PointCoefficients { p: 1.0, p_dot: 0.0, q: 0.0 });
        }
        let t0 = trace(&IndicatrixProfile::Flat, 0.0, 0.0, 3.0);
        let c0 = jacobi_coefficients(&IndicatrixProfile::Flat, &t0).unwrap();
        assert_eq!(c0.at(1.0).unwrap(), PointCoefficients { p: 0.0, p_dot: 0.0, q: 0.0 });
    }

    #[test]
    fn randers_p_at_theta_zero() {
        let p = IndicatrixProfile::randers(0.5).unwrap();
        let t = trace(&p, 0.0, 0.7, 1.0);
        let c = jacobi_coefficients(&p, &t).unwrap();
        assert_relative_eq!(c.at(0.0).unwrap().p, 4.0 * 0.49, epsilon = 1e-14);
    }

    #[test]
    fn profile_mismatch() {
        let t = trace(&IndicatrixProfile::Flat, 0.0, 1.0, 1.0);
        assert!(matches!(jacobi_coefficients(&IndicatrixProfile::Limacon, &t), Err(Error::ProfileMismatch)));
    }

    #[test]
    fn p_dot_matches_finite_difference() {
        for p in [IndicatrixProfile::randers(0.5).unwrap(), IndicatrixProfile::Limacon] {
            let t = trace(&p, 0.4, 0.9, 4.0);
            let c = jacobi_coefficients(&p, &t).unwrap();
            let h = 1e-4;
            for s in [0.5, 1.7, 3.2] {
                let pp = |x: f64| c.at(x).unwrap().p;
                let fd = (-pp(s + 2.0 * h) + 8.0 * pp(s + h) - 8.0 * pp(s - h) + pp(s - 2.0 * h)) / (12.0 * h);
                let exact = c.at(s).unwrap().p_dot;
                assert!((exact - fd).abs() < 1e-7 * exact.abs().max(1.0), "{s}: {exact} vs {fd}");
            }
        }
    }

    #[test]
    fn general_p_dot_chain_rule() {
        // Ṗ with every table entry live, against a difference along a
        // straight path in table space.
        let base = InvariantTable {
            i: 0.3,
            k: -0.4,
            a1: 0.2,
            a2: 0.7,
            j1: -0.5,
            j2: 0.25,
            i_4: 0.9,
            ..Default::default()
        };
        let rate = InvariantTable {
            i_1: 0.11,
            i_41: -0.2,
            j1_1: 0.3,
            j2_1: 0.05,
            k_1: -0.7,
            a2_1: 0.4,
            a1_1: 0.6,
            ..Default::default()
        };
        let l0 = 1.3;
        let along = |e: f64| {
            let t = InvariantTable {
                i: base.i + e * rate.i_1,
                i_4: base.i_4 + e * rate.i_41,
                j1: base.j1 + e * rate.j1_1,
                j2: base.j2 + e * rate.j2_1,
                k: base.k + e * rate.k_1,
                a2: base.a2 + e * rate.a2_1,
                a1: base.a1 + e * rate.a1_1,
                ..base
            };
            jacobi_p(&t, l0 + e * lambda_rate(&base, l0))
        };
        let h = 1e-5;
        let fd = (along(h) - along(-h)) / (2.0 * h);
        let t = InvariantTable { i_1: rate.i_1, i_41: rate.i_41, j1_1: rate.j1_1, j2_1: rate.j2_1, k_1: rate.k_1, a2_1: rate.a2_1, a1_1: rate.a1_1, ..base };
        assert!((jacobi_p_dot(&t, l0) - fd).abs() < 1e-8);
    }

    #[test]
    fn q_reduces_on_homogeneous_table() {
        let t = InvariantTable { i: 0.4, i_4: -0.3, i_41: 0.2, i_411: 0.7, ..Default::default() };
        let l: f64 = 1.7;
        let (i, i4) = (t.i, t.i_4);
        let want = (4.0 * i.powi(4) + 16.0 * i * i * i4 + 2.0 * i * i + 5.0 * i4 * i4 + i4) * l.powi(4)
            + 6.0 * i * t.i_41 * l.powi(3)
            + t.i_411 * l * l;
        assert_relative_eq!(jacobi_q(&t, l), want, epsilon = 1e-12);
    }

    #[test]
    fn apply_flat_kernel() {
        let t = trace(&IndicatrixProfile::Flat, 0.0, 1.0, 3.0);
        let c = jacobi_coefficients(&IndicatrixProfile::Flat, &t).unwrap();
        let s: f64 = 1.3;
        let u = [s - s.sin(), 1.0 - s.cos(), s.sin(), s.cos(), -s.sin()];
        assert!(jacobi_apply(&c, &u, s).unwrap().abs() < 1e-15);
        assert_eq!(jacobi_apply(&c, &[1.0, 0.0, 0.0, 0.0, 0.0], s).unwrap(), 0.0);

        let t2 = trace(&IndicatrixProfile::Flat, 0.0, 2.0, 3.0);
        let c2 = jacobi_coefficients(&IndicatrixProfile::Flat, &t2).unwrap();
        let v = 2.0 * s;
        let u = [v.sin(), 2.0 * v.cos(), -4.0 * v.sin(), -8.0 * v.cos(), 16.0 * v.sin()];
        assert!(jacobi_apply(&c2, &u, s).unwrap().abs() < 1e-12);
    }

    #[test]
    fn flat_conjugate_points() {
        let t = trace(&IndicatrixProfile::Flat, 0.0, 1.0, 1.0);
        let c = jacobi_coefficients(&IndicatrixProfile::Flat, &t).unwrap();
        let pts = conjugate_points(&c, 14.0).unwrap();
        let want = [TAU, 8.986_818_916_308_4, 2.0 * TAU];
        assert_eq!(pts.len(), 3, "{pts:?}");
        for (p, w) in pts.iter().zip(want) {
            assert!((p.c - w).abs() < 1e-7, "{} vs {w}", p.c);
            assert_eq!(p.multiplicity, 1);
        }
        assert!(conjugate_points(&c, 6.0).unwrap().is_empty());
        assert_eq!(index(&c, TAU - 0.1).unwrap(), 0);
        assert_eq!(index(&c, TAU + 0.1).unwrap(), 1);
        assert_eq!(index(&c, 2.0 * TAU + 0.1).unwrap(), 3);
    }

    #[test]
    fn straight_line_has_no_conjugate_points() {
        let t = trace(&IndicatrixProfile::Flat, 0.0, 0.0, 1.0);
        let c = jacobi_coefficients(&IndicatrixProfile::Flat, &t).unwrap();
        assert!(conjugate_points(&c, 100.0).unwrap().is_empty());
    }

    #[test]
    fn flat_variation() {
        let t = trace(&IndicatrixProfile::Flat, 0.0, 1.0, 3.0);
        let v3 = |s: f64| [s - s.sin(), 1.0 - s.cos(), s.sin(), s.cos()];
        let f = reconstruct_variation(&IndicatrixProfile::Flat, &t, v3).unwrap();
        for (s, v) in f.s.iter().zip(&f.v).step_by(250) {
            assert!((v[0] + (s - s.sin())).abs() < 1e-9);
            assert!((v[1] - (1.0 - s.cos())).abs() < 1e-12);
            assert!((v[3] + s.sin()).abs() < 1e-12);
        }
        let zero = reconstruct_variation(&IndicatrixProfile::Flat, &t, |_| [0.0; 4]).unwrap();
        assert!(zero.v.iter().all(|v| v.iter().all(|x| *x == 0.0)));
        assert!(variation_residual(&t, v3, 1.5, 1e-3).unwrap() < 1e-9);
    }

    #[test]
    fn randers_variation_satisfies_rates() {
        let p = IndicatrixProfile::randers(0.5).unwrap();
        let len = 6.0;
        let t = trace(&p, 0.0, 0.8, len);
        // s²(s − ℓ)²
        let v3 = |s: f64| {
            let q = s * (s - len);
            let dq = 2.0 * s - len;
            [q * q, 2.0 * q * dq, 2.0 * dq * dq + 4.0 * q, 12.0 * dq]
        };
        for s in [0.5, 2.0, 3.3, 5.1] {
            let r = variation_residual(&t, v3, s, 1e-3).unwrap();
            assert!(r < 1e-6, "{s}: {r}");
        }
    }

    #[test]
    fn csv_format() {
        let csv = conjugate_points_csv(&[ConjugatePoint { c: TAU, multiplicity: 1 }]);
        assert_eq!(csv, "c,multiplicity\n6.283185307e0,1\n");
    }
}
