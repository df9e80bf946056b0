//! Indicatrix profiles of homogeneous sub-Finsler metrics on the Heisenberg
//! group.
//!
//! A profile is the scaling function `r(θ)`: the indicatrix in each contact
//! plane is the closed curve with polar radius `R(θ) = 1/r(θ)`. All
//! derivatives are analytic for every kind of profile.

use std::cell::RefCell;
use std::f64::consts::{FRAC_PI_2, PI, TAU};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::invariants::heisenberg_i;

/// Highest derivative order available from [`IndicatrixProfile::derivative_table`].
pub const MAX_DERIVATIVE: usize = 6;

/// The scaling function `r(θ)`, 2π-periodic by construction.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase", deny_unknown_fields)]
pub enum IndicatrixProfile {
    /// `r ≡ 1`: the flat sub-Riemannian metric.
    Flat,
    /// `r = 1 + B cos θ` with `0 < B < 1`.
    Randers {
        #[serde(rename = "B")]
        b: f64,
    },
    /// `r = 1/(3 + cos θ)`, the reciprocal of the limaçon radius.
    Limacon,
    /// `r = a₀ + Σ (aₙ cos nθ + bₙ sin nθ)`; `b[0]` multiplies `sin θ`.
    Fourier {
        #[serde(rename = "a")]
        cos: Vec<f64>,
        #[serde(rename = "b", default)]
        sin: Vec<f64>,
    },
}

/// `r` and its first three θ-derivatives at one angle.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ProfileDerivatives {
    pub r: f64,
    pub r1: f64,
    pub r2: f64,
    pub r3: f64,
}

impl ProfileDerivatives {
    /// `r(r + r'')`, the strong-convexity quantity.
    pub fn convexity(&self) -> f64 {
        self.r * (self.r + self.r2)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConvexityReport {
    pub ok: bool,
    pub min_value: f64,
    pub argmin: f64,
}

/// k-th derivative of `cos(nθ)` / `sin(nθ)` via the phase shift `kπ/2`.
fn cos_deriv(n: f64, theta: f64, k: usize) -> f64 {
    n.powi(k as i32) * (n * theta + k as f64 * FRAC_PI_2).cos()
}

fn sin_deriv(n: f64, theta: f64, k: usize) -> f64 {
    n.powi(k as i32) * (n * theta + k as f64 * FRAC_PI_2).sin()
}

impl IndicatrixProfile {
    pub fn randers(b: f64) -> Result<Self> {
        if !(b > 0.0 && b < 1.0) {
            return Err(Error::InvalidArgument(format!("Randers parameter B = {b} must lie in (0, 1)")));
        }
        Ok(IndicatrixProfile::Randers { b })
    }

    pub fn fourier(cos: Vec<f64>, sin: Vec<f64>) -> Result<Self> {
        if cos.is_empty() {
            return Err(Error::InvalidArgument("fourier profile needs a constant term a0".into()));
        }
        Ok(IndicatrixProfile::Fourier { cos, sin })
    }

    /// Checks the parameter ranges of a deserialized profile.
    pub fn validate(&self) -> Result<()> {
        match self {
            IndicatrixProfile::Randers { b } => Self::randers(*b).map(|_| ()),
            IndicatrixProfile::Fourier { cos, sin } => Self::fourier(cos.clone(), sin.clone()).map(|_| ()),
            _ => Ok(()),
        }
    }

    /// Short human-readable descriptor, e.g. `randers(B=0.5)`.
    pub fn label(&self) -> String {
        match self {
            IndicatrixProfile::Flat => "flat".into(),
            IndicatrixProfile::Randers { b } => format!("randers(B={b})"),
            IndicatrixProfile::Limacon => "limacon".into(),
            IndicatrixProfile::Fourier { cos, sin } => format!("fourier(a={cos:?}, b={sin:?})"),
        }
    }

    /// Whether `r(−θ) = r(θ)`.
    pub fn is_even(&self) -> bool {
        match self {
            IndicatrixProfile::Fourier { sin, .. } => sin.iter().all(|&b| b == 0.0),
            _ => true,
        }
    }

    /// k-th θ-derivative of `r`, `k ≤ MAX_DERIVATIVE`.
    pub fn derivative(&self, theta: f64, k: usize) -> f64 {
        self.derivative_table(theta)[k]
    }

    /// `[r, r', …, r⁽⁶⁾]` at `theta`.
    pub fn derivative_table(&self, theta: f64) -> [f64; MAX_DERIVATIVE + 1] {
        let mut d = [0.0; MAX_DERIVATIVE + 1];
        match self {
            IndicatrixProfile::Flat => d[0] = 1.0,
            IndicatrixProfile::Randers { b } => {
                for (k, slot) in d.iter_mut().enumerate() {
                    *slot = b * cos_deriv(1.0, theta, k);
                }
                d[0] += 1.0;
            }
            IndicatrixProfile::Limacon => {
                // r·g = 1 with g = 3 + cos θ, so
                // r⁽ⁿ⁾ = −(1/g) Σ_{k=1..n} C(n,k) g⁽ᵏ⁾ r⁽ⁿ⁻ᵏ⁾.
                let g: Vec<f64> = (0..=MAX_DERIVATIVE)
                    .map(|k| if k == 0 { 3.0 + theta.cos() } else { cos_deriv(1.0, theta, k) })
                    .collect();
                d[0] = 1.0 / g[0];
                for n in 1..=MAX_DERIVATIVE {
                    let mut binom = 1.0;
                    let mut acc = 0.0;
                    for k in 1..=n {
                        binom = binom * (n - k + 1) as f64 / k as f64;
                        acc += binom * g[k] * d[n - k];
                    }
                    d[n] = -acc / g[0];
                }
            }
            IndicatrixProfile::Fourier { cos, sin } => {
                d[0] = cos.first().copied().unwrap_or(0.0);
                for (k, slot) in d.iter_mut().enumerate() {
                    for (n, a) in cos.iter().enumerate().skip(1) {
                        *slot += a * cos_deriv(n as f64, theta, k);
                    }
                    for (n, b) in sin.iter().enumerate() {
                        *slot += b * sin_deriv((n + 1) as f64, theta, k);
                    }
                }
            }
        }
        d
    }

    /// Angles where `r(r + r'')` has an analytic critical point, for the
    /// built-in kinds. Empty for Fourier profiles.
    fn convexity_critical_points(&self) -> Vec<f64> {
        match self {
            IndicatrixProfile::Flat | IndicatrixProfile::Randers { .. } => vec![0.0, PI],
            // d/dθ [(9 cos θ + 11)/(3 + cos θ)⁴] = −sin θ (27 cos θ + 17)/(3 + cos θ)⁵
            IndicatrixProfile::Limacon => {
                let t = (-17.0_f64 / 27.0).acos();
                vec![0.0, PI, t, TAU - t]
            }
            IndicatrixProfile::Fourier { .. } => Vec::new(),
        }
    }
}

/// `r, r', r'', r'''` at `theta`.
pub fn evaluate_profile(profile: &IndicatrixProfile, theta: f64) -> ProfileDerivatives {
    let d = profile.derivative_table(theta);
    ProfileDerivatives { r: d[0], r1: d[1], r2: d[2], r3: d[3] }
}

/// Fails with [`Error::ConvexityViolation`] unless `r > 0` and `r + r'' > 0`.
pub(crate) fn require_convex(theta: f64, d: &ProfileDerivatives) -> Result<()> {
    if d.r > 0.0 && d.r + d.r2 > 0.0 {
        Ok(())
    } else {
        Err(Error::ConvexityViolation { theta, value: d.convexity() })
    }
}

/// Samples `r(r + r'')` on a uniform grid of `grid_size` angles in `[0, 2π)`.
///
/// For the built-in kinds the analytic critical points are added to the
/// sample set, so the reported minimum is exact. Fourier profiles are only
/// checked on the grid.
pub fn check_strong_convexity(profile: &IndicatrixProfile, grid_size: usize) -> Result<ConvexityReport> {
    if grid_size < 16 {
        return Err(Error::InvalidArgument(format!("grid_size {grid_size} < 16")));
    }
    let grid = (0..grid_size).map(|i| TAU * i as f64 / grid_size as f64);
    let (argmin, min_value) = grid
        .chain(profile.convexity_critical_points())
        .map(|t| (t, evaluate_profile(profile, t).convexity()))
        .fold((0.0, f64::INFINITY), |best, cur| if cur.1 < best.1 { cur } else { best });
    Ok(ConvexityReport { ok: min_value > 0.0, min_value, argmin })
}

/// Integral of `I` over one turn of the indicatrix, against the fiber
/// measure `φ = √((r + r'')/r) dθ`. Vanishes for every closed strongly
/// convex indicatrix.
pub fn rund_average(profile: &IndicatrixProfile) -> Result<f64> {
    let integrand = |t: f64| -> Result<f64> {
        let d = evaluate_profile(profile, t);
        require_convex(t, &d)?;
        Ok(heisenberg_i(profile, t)? * ((d.r + d.r2) / d.r).sqrt())
    };
    integrate_turn(integrand, 1e-13)
}

/// Double-exponential quadrature of `f` over `[0, 2π]`. The first error
/// raised by `f` aborts the result.
pub(crate) fn integrate_turn(f: impl Fn(f64) -> Result<f64>, tol: f64) -> Result<f64> {
    let failure = RefCell::new(None);
    let out = quadrature::double_exponential::integrate(
        |t| match f(t) {
            Ok(v) => v,
            Err(e) => {
                failure.borrow_mut().get_or_insert(e);
                0.0
            }
        },
        0.0,
        TAU,
        tol,
    );
    match failure.into_inner() {
        Some(e) => Err(e),
        None => Ok(out.integral),
    }
}

/// Planar Finsler norm `F(v) = |v| r(ψ)`, `ψ` the direction angle of `v`.
/// The unit ball is the indicatrix.
pub fn finsler_norm(profile: &IndicatrixProfile, v: [f64; 2]) -> f64 {
    let len = v[0].hypot(v[1]);
    if len == 0.0 {
        return 0.0;
    }
    len * profile.derivative_table(v[1].atan2(v[0]))[0]
}

/// Whether a structure whose invariant `I` is the constant `i` can have a
/// closed, strongly convex indicatrix. The average of `I` over a closed
/// indicatrix is zero, and a nonzero constant has nonzero average.
pub fn constant_invariant_admits_closed_indicatrix(i: f64) -> bool {
    i == 0.0
}
