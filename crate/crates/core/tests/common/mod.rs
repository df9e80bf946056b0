#![allow(dead_code)]

use subfinsler::geodesics::{fiber_period, integrate, GeodesicState, GeodesicTrace, IntegratorSettings};
use subfinsler::IndicatrixProfile;

pub fn period(profile: &IndicatrixProfile, theta0: f64, lambda0: f64) -> f64 {
    fiber_period(profile, &GeodesicState::new(0.0, 0.0, 0.0, theta0, lambda0)).unwrap()
}

/// RK4 trace (step 1e−3) from the origin covering `turns` fiber turns.
pub fn turns(profile: &IndicatrixProfile, theta0: f64, lambda0: f64, turns: f64) -> GeodesicTrace {
    let len = turns * period(profile, theta0, lambda0);
    integrate(profile, GeodesicState::new(0.0, 0.0, 0.0, theta0, lambda0), &IntegratorSettings::fixed(1e-3, len)).unwrap()
}

pub fn builtin_profiles() -> Vec<IndicatrixProfile> {
    vec![IndicatrixProfile::Flat, IndicatrixProfile::randers(0.5).unwrap(), IndicatrixProfile::Limacon]
}

/// Polynomial in `s` with ascending coefficients.
#[derive(Debug, Clone)]
pub struct Poly(pub Vec<f64>);

impl Poly {
    pub fn eval(&self, s: f64) -> f64 {
        self.0.iter().rev().fold(0.0, |acc, c| acc * s + c)
    }

    pub fn deriv(&self) -> Poly {
        Poly(self.0.iter().enumerate().skip(1).map(|(k, c)| k as f64 * c).collect())
    }

    pub fn mul(&self, other: &Poly) -> Poly {
        let mut out = vec![0.0; self.0.len() + other.0.len() - 1];
        for (i, a) in self.0.iter().enumerate() {
            for (j, b) in other.0.iter().enumerate() {
                out[i + j] += a * b;
            }
        }
        Poly(out)
    }

    /// `[p, p', …, p⁽ᵏ⁾]` at `s`.
    pub fn jet<const K: usize>(&self, s: f64) -> [f64; K] {
        let mut out = [0.0; K];
        let mut p = self.clone();
        for slot in out.iter_mut() {
            *slot = p.eval(s);
            p = p.deriv();
        }
        out
    }
}

/// `s²(s − ℓ)² p(s)`: vanishes to first order at both ends of `[0, ℓ]`.
pub fn clamped(len: f64, p: &[f64]) -> Poly {
    let q = Poly(vec![0.0, -len, 1.0]); // s(s − ℓ)
    q.mul(&q).mul(&Poly(p.to_vec()))
}

pub fn simpson<F: FnMut(f64) -> f64>(mut f: F, a: f64, b: f64, n: usize) -> f64 {
    let n = n + n % 2;
    let h = (b - a) / n as f64;
    let mut acc = f(a) + f(b);
    for k in 1..n {
        acc += if k % 2 == 1 { 4.0 } else { 2.0 } * f(a + k as f64 * h);
    }
    acc * h / 3.0
}
