//! Normal geodesics of the homogeneous structure, their conserved quantity
//! and the closure of their projections to the xy-plane.

use std::f64::consts::TAU;
use std::fmt::Write as _;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::indicatrix::{evaluate_profile, require_convex, IndicatrixProfile};
use crate::invariants::heisenberg_i;
use crate::ode;

/// A point of the geodesic bundle together with its arc-length parameter.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct GeodesicState {
    pub s: f64,
    pub x: f64,
    pub y: f64,
    pub z: f64,
    pub theta: f64,
    pub lambda: f64,
}

impl GeodesicState {
    /// State at `s = 0`.
    pub fn new(x: f64, y: f64, z: f64, theta: f64, lambda: f64) -> Self {
        GeodesicState { s: 0.0, x, y, z, theta, lambda }
    }

    pub fn vector(&self) -> [f64; 5] {
        [self.x, self.y, self.z, self.theta, self.lambda]
    }

    pub fn from_vector(s: f64, v: &[f64; 5]) -> Self {
        GeodesicState { s, x: v[0], y: v[1], z: v[2], theta: v[3], lambda: v[4] }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Stepper {
    /// Classical RK4 with a fixed step.
    Fixed { step: f64 },
    /// Dormand–Prince 5(4) with local tolerance.
    Adaptive { tolerance: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IntegratorSettings {
    pub stepper: Stepper,
    pub max_arclength: f64,
}

impl Default for IntegratorSettings {
    fn default() -> Self {
        IntegratorSettings::fixed(1e-3, TAU)
    }
}

impl IntegratorSettings {
    pub fn fixed(step: f64, max_arclength: f64) -> Self {
        IntegratorSettings { stepper: Stepper::Fixed { step }, max_arclength }
    }

    pub fn adaptive(tolerance: f64, max_arclength: f64) -> Self {
        IntegratorSettings { stepper: Stepper::Adaptive { tolerance }, max_arclength }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.max_arclength.is_finite() && self.max_arclength > 0.0) {
            return Err(Error::InvalidSettings(format!("max_arclength {} must be positive", self.max_arclength)));
        }
        match self.stepper {
            Stepper::Fixed { step } => {
                if !(step.is_finite() && step > 0.0) {
                    return Err(Error::InvalidSettings(format!("step {step} must be positive")));
                }
                if self.max_arclength / step > 1e8 {
                    return Err(Error::InvalidSettings("more than 1e8 steps requested".into()));
                }
            }
            Stepper::Adaptive { tolerance } => {
                if !(tolerance > 0.0 && tolerance <= 1e-3) {
                    return Err(Error::InvalidSettings(format!("tolerance {tolerance} outside (0, 1e-3]")));
                }
            }
        }
        Ok(())
    }
}

/// `c = λ r √(r(r + r''))`, constant along every geodesic.
pub fn conserved_quantity(profile: &IndicatrixProfile, state: &GeodesicState) -> f64 {
    let d = evaluate_profile(profile, state.theta);
    state.lambda * d.r * d.convexity().sqrt()
}

/// Arc length of one turn of `θ` along the geodesic through `state`:
/// `∫ r(r + r'') dθ / |c|` over a period, `c` the conserved quantity.
pub fn fiber_period(profile: &IndicatrixProfile, state: &GeodesicState) -> Result<f64> {
    let c = conserved_quantity(profile, state);
    if c == 0.0 {
        return Err(Error::ZeroMultiplier);
    }
    let integrand = |t: f64| -> Result<f64> {
        let d = evaluate_profile(profile, t);
        require_convex(t, &d)?;
        Ok(d.convexity())
    };
    Ok(crate::indicatrix::integrate_turn(integrand, 1e-14)? / c.abs())
}

/// `(dx, dy, dz, dθ, dλ)/ds` at `state`.
pub fn geodesic_rhs(profile: &IndicatrixProfile, state: &GeodesicState) -> Result<[f64; 5]> {
    rhs(profile, &state.vector())
}

fn rhs(profile: &IndicatrixProfile, v: &[f64; 5]) -> Result<[f64; 5]> {
    let [x, y, _z, theta, lambda] = *v;
    let d = evaluate_profile(profile, theta);
    require_convex(theta, &d)?;
    let (s, c) = theta.sin_cos();
    let i = heisenberg_i(profile, theta)?;
    Ok([
        c / d.r,
        -s / d.r,
        (x * s + y * c) / (2.0 * d.r),
        (d.r / (d.r + d.r2)).sqrt() * lambda,
        i * lambda * lambda,
    ])
}

/// An integrated geodesic. Samples are strictly increasing in `s`.
#[derive(Debug, Clone, PartialEq)]
pub struct GeodesicTrace {
    pub profile: IndicatrixProfile,
    pub initial: GeodesicState,
    pub settings: IntegratorSettings,
    pub samples: Vec<GeodesicState>,
    /// Largest relative deviation of the conserved quantity from its
    /// initial value (absolute when the initial value is zero).
    pub max_conserved_drift: f64,
}

fn hermite(s0: f64, s1: f64, y0: f64, m0: f64, y1: f64, m1: f64, s: f64) -> f64 {
    let h = s1 - s0;
    let t = (s - s0) / h;
    let t2 = t * t;
    let t3 = t2 * t;
    (2.0 * t3 - 3.0 * t2 + 1.0) * y0 + (t3 - 2.0 * t2 + t) * h * m0 + (-2.0 * t3 + 3.0 * t2) * y1 + (t3 - t2) * h * m1
}

impl GeodesicTrace {
    pub fn arclength(&self) -> f64 {
        self.samples.last().map_or(0.0, |l| l.s) - self.initial.s
    }

    pub fn final_state(&self) -> GeodesicState {
        *self.samples.last().unwrap_or(&self.initial)
    }

    pub fn conserved(&self, state: &GeodesicState) -> f64 {
        conserved_quantity(&self.profile, state)
    }

    fn segment(&self, s: f64) -> Result<usize> {
        let first = self.samples.first().ok_or_else(|| Error::InsufficientTrace("empty trace".into()))?;
        let last = self.final_state();
        if !(s >= first.s && s <= last.s) || self.samples.len() < 2 {
            return Err(Error::InvalidArgument(format!("s = {s} outside [{}, {}]", first.s, last.s)));
        }
        let k = self.samples.partition_point(|p| p.s <= s);
        Ok(k.clamp(1, self.samples.len() - 1) - 1)
    }

    /// Dense output: cubic Hermite interpolation with the vector field as
    /// the slope at each sample.
    pub fn state_at(&self, s: f64) -> Result<GeodesicState> {
        let k = self.segment(s)?;
        let (a, b) = (self.samples[k], self.samples[k + 1]);
        let (va, vb) = (a.vector(), b.vector());
        let (ma, mb) = (rhs(&self.profile, &va)?, rhs(&self.profile, &vb)?);
        let mut v = [0.0; 5];
        for i in 0..5 {
            v[i] = hermite(a.s, b.s, va[i], ma[i], vb[i], mb[i], s);
        }
        Ok(GeodesicState::from_vector(s, &v))
    }

    /// First `s` at which the interpolated `θ(s)` equals `theta`, if the
    /// trace reaches it. Requires `θ` to be monotone along the trace.
    pub fn s_at_theta(&self, theta: f64) -> Option<f64> {
        let th0 = self.samples.first()?.theta;
        let dir = (theta - th0).signum();
        if dir == 0.0 {
            return Some(self.samples[0].s);
        }
        let k = self.samples.iter().position(|p| dir * (p.theta - theta) >= 0.0)?;
        if k == 0 {
            return Some(self.samples[0].s);
        }
        let (mut lo, mut hi) = (self.samples[k - 1].s, self.samples[k].s);
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if mid <= lo || mid >= hi {
                break;
            }
            let th = self.state_at(mid).ok()?.theta;
            if dir * (th - theta) >= 0.0 {
                hi = mid;
            } else {
                lo = mid;
            }
        }
        Some(0.5 * (lo + hi))
    }

    /// CSV with header `s,x,y,z,theta,lambda,conserved`, ten significant
    /// digits per value.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("s,x,y,z,theta,lambda,conserved\n");
        for p in &self.samples {
            let c = self.conserved(p);
            let _ = writeln!(
                out,
                "{:.9e},{:.9e},{:.9e},{:.9e},{:.9e},{:.9e},{:.9e}",
                p.s, p.x, p.y, p.z, p.theta, p.lambda, c
            );
        }
        out
    }
}

/// Integrates the geodesic through `initial` for `settings.max_arclength`.
pub fn integrate(profile: &IndicatrixProfile, initial: GeodesicState, settings: &IntegratorSettings) -> Result<GeodesicTrace> {
    profile.validate()?;
    settings.validate()?;
    let mut f = |_s: f64, v: &[f64; 5]| rhs(profile, v);
    // Fails early on a non-convex starting angle.
    f(initial.s, &initial.vector())?;

    let s0 = initial.s;
    let s_end = s0 + settings.max_arclength;
    let mut samples = vec![initial];
    match settings.stepper {
        Stepper::Fixed { step } => {
            let n = (settings.max_arclength / step).ceil().max(1.0) as usize;
            let mut v = initial.vector();
            let mut s = s0;
            for i in 0..n {
                let next = if i + 1 == n { s_end } else { s0 + (i + 1) as f64 * step };
                v = ode::rk4_step(&mut f, s, &v, next - s)?;
                s = next;
                samples.push(GeodesicState::from_vector(s, &v));
            }
        }
        Stepper::Adaptive { tolerance } => {
            samples.clear();
            ode::dopri5(&mut f, s0, initial.vector(), s_end, tolerance, |s, v| {
                samples.push(GeodesicState::from_vector(s, v))
            })?;
        }
    }

    let c0 = conserved_quantity(profile, &initial);
    let max_conserved_drift = samples
        .iter()
        .map(|p| {
            let d = (conserved_quantity(profile, p) - c0).abs();
            if c0 != 0.0 {
                d / c0.abs()
            } else {
                d
            }
        })
        .fold(0.0, f64::max);

    Ok(GeodesicTrace { profile: profile.clone(), initial, settings: *settings, samples, max_conserved_drift })
}

/// Closed-form Randers geodesic `(x, y, z)` at fiber angle `theta`, for
/// `r = 1 + B cos θ` with `0 ≤ B < 1`.
pub fn randers_closed_form(b: f64, initial: &GeodesicState, theta: f64) -> Result<[f64; 3]> {
    if !(0.0..1.0).contains(&b) {
        return Err(Error::InvalidArgument(format!("Randers parameter {b} outside [0, 1)")));
    }
    if initial.lambda == 0.0 {
        return Err(Error::ZeroMultiplier);
    }
    let GeodesicState { x: x0, y: y0, z: z0, theta: t0, lambda: l0, .. } = *initial;
    let k = l0 * (1.0 + b * t0.cos()).powf(1.5);
    let ds = theta.sin() - t0.sin();
    let dc = theta.cos() - t0.cos();
    let dt = theta - t0;
    Ok([
        x0 + ds / k,
        y0 + dc / k,
        z0 + (dt - dt.sin()) / (2.0 * k * k) + (y0 * ds - x0 * dc) / (2.0 * k),
    ])
}

/// Closed-form projection `(x, y)` at fiber angle `theta` of a geodesic of
/// the limaçon metric `r = 1/(3 + cos θ)`.
pub fn limacon_closed_form(initial: &GeodesicState, theta: f64) -> Result<[f64; 2]> {
    if initial.lambda == 0.0 {
        return Err(Error::ZeroMultiplier);
    }
    let t0 = initial.theta;
    let l = initial.lambda * (9.0 * t0.cos() + 11.0).sqrt() / (3.0 + t0.cos()).powi(3);
    let fx = |t: f64| t.sin() * (4.0 * t.cos() + 6.0) / (3.0 + t.cos()).powi(2);
    let fy = |t: f64| (9.0 * t.cos() + 19.0) / (3.0 + t.cos()).powi(2);
    Ok([
        initial.x + (fx(theta) - fx(t0)) / (2.0 * l),
        initial.y - (fy(theta) - fy(t0)) / l,
    ])
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ClosureReport {
    /// The xy-gap after one fiber turn is below `1e−6 · diameter`.
    pub closes: bool,
    /// Arc length of one turn of `θ`.
    pub period_arclength: f64,
    /// Signed area `½∮(x dy − y dx)` of the projection over one turn.
    pub enclosed_area: f64,
    /// Increase of `z` over one turn.
    pub z_gain: f64,
    pub gap: f64,
    pub diameter: f64,
    /// `|Δz + area| / |area|`; the contact form forces `Δz = −area`.
    pub lift_defect: f64,
}

/// Largest width of a planar point set over 180 directions.
pub(crate) fn planar_diameter(points: &[[f64; 2]]) -> f64 {
    (0..180)
        .map(|k| {
            let (s, c) = (std::f64::consts::PI * k as f64 / 180.0).sin_cos();
            let (lo, hi) = points.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), p| {
                let t = p[0] * c + p[1] * s;
                (lo.min(t), hi.max(t))
            });
            hi - lo
        })
        .fold(0.0, f64::max)
}

/// Locates one full turn of the fiber angle and measures how the projection
/// closes over it.
pub fn projection_closure(trace: &GeodesicTrace) -> Result<ClosureReport> {
    let start = *trace.samples.first().ok_or_else(|| Error::InsufficientTrace("empty trace".into()))?;
    if start.lambda == 0.0 {
        return Err(Error::InsufficientTrace("λ₀ = 0: the fiber angle is constant".into()));
    }
    let target = start.theta + TAU * start.lambda.signum();
    let end = trace.final_state();
    let advance = (end.theta - start.theta).abs();
    // A trace integrated for exactly one period may fall short by round-off.
    if advance < TAU * (1.0 - 1e-9) {
        return Err(Error::InsufficientTrace(format!("θ advances by {advance} < 2π")));
    }
    let s_star = if advance < TAU {
        end.s
    } else {
        trace
            .s_at_theta(target)
            .ok_or_else(|| Error::InsufficientTrace("θ never reaches a full turn".into()))?
    };
    let closing = trace.state_at(s_star)?;

    // ½∫(x ẏ − y ẋ) ds, three-point Gauss on each sample interval.
    const GX: [f64; 3] = [-0.774_596_669_241_483_4, 0.0, 0.774_596_669_241_483_4];
    const GW: [f64; 3] = [5.0 / 9.0, 8.0 / 9.0, 5.0 / 9.0];
    let mut area = 0.0;
    let mut points = Vec::new();
    for w in trace.samples.windows(2) {
        let (a, b) = (w[0].s, w[1].s.min(s_star));
        if a >= s_star {
            break;
        }
        points.push([w[0].x, w[0].y]);
        let (mid, half) = (0.5 * (a + b), 0.5 * (b - a));
        for (gx, gw) in GX.iter().zip(GW) {
            let p = trace.state_at(mid + half * gx)?;
            let v = geodesic_rhs(&trace.profile, &p)?;
            area += gw * half * 0.5 * (p.x * v[1] - p.y * v[0]);
        }
    }
    points.push([closing.x, closing.y]);

    let diameter = planar_diameter(&points);
    let gap = (closing.x - start.x).hypot(closing.y - start.y);
    let z_gain = closing.z - start.z;
    Ok(ClosureReport {
        closes: gap < 1e-6 * diameter,
        period_arclength: s_star - start.s,
        enclosed_area: area,
        z_gain,
        gap,
        diameter,
        lift_defect: (z_gain + area).abs() / area.abs().max(f64::MIN_POSITIVE),
    })
}
