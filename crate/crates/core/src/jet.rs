//! Truncated Taylor arithmetic in one variable.
//!
//! A `Jet` stores the normalized Taylor coefficients `c[k] = f^(k)(t0) / k!`
//! of a function at a point, up to degree `JET_DEGREE`. Arithmetic on jets
//! propagates exact derivatives, which is how the θ-derivatives of `I` are
//! obtained from the analytic derivatives of the profile.

use std::ops::{Add, Div, Mul, Neg, Sub};

pub(crate) const JET_LEN: usize = 4;

#[derive(Debug, Clone, Copy, PartialEq)]
pub(crate) struct Jet {
    pub c: [f64; JET_LEN],
}

impl Jet {
    /// Builds a jet from plain derivative values `f, f', f'', ...`.
    pub fn from_derivatives(d: &[f64]) -> Self {
        let mut c = [0.0; JET_LEN];
        let mut fact = 1.0;
        for (k, slot) in c.iter_mut().enumerate() {
            if k > 0 {
                fact *= k as f64;
            }
            *slot = d.get(k).copied().unwrap_or(0.0) / fact;
        }
        Jet { c }
    }

    pub fn value(&self) -> f64 {
        self.c[0]
    }

    /// k-th derivative at the expansion point.
    #[cfg(test)]
    pub fn derivative(&self, k: usize) -> f64 {
        let fact: f64 = (1..=k).map(|j| j as f64).product();
        self.c[k] * fact
    }

    /// Jet of the derivative. The top coefficient is lost, so the result is
    /// valid to one degree less than `self`.
    pub fn differentiate(&self) -> Self {
        let mut c = [0.0; JET_LEN];
        for (k, ck) in c.iter_mut().take(JET_LEN - 1).enumerate() {
            *ck = (k + 1) as f64 * self.c[k + 1];
        }
        Jet { c }
    }

    pub fn scale(&self, s: f64) -> Self {
        let mut c = self.c;
        c.iter_mut().for_each(|v| *v *= s);
        Jet { c }
    }

    /// `self^p` for a jet with positive value.
    pub fn powf(&self, p: f64) -> Self {
        let a = &self.c;
        let mut b = [0.0; JET_LEN];
        b[0] = a[0].powf(p);
        // a * b' = p * a' * b, solved order by order.
        for n in 1..JET_LEN {
            let mut acc = 0.0;
            for k in 1..=n {
                acc += (p * k as f64 - (n - k) as f64) * a[k] * b[n - k];
            }
            b[n] = acc / (n as f64 * a[0]);
        }
        Jet { c: b }
    }

    pub fn sqrt(&self) -> Self {
        self.powf(0.5)
    }

    pub fn recip(&self) -> Self {
        let a = &self.c;
        let mut b = [0.0; JET_LEN];
        b[0] = 1.0 / a[0];
        for n in 1..JET_LEN {
            let acc: f64 = (1..=n).map(|k| a[k] * b[n - k]).sum();
            b[n] = -acc / a[0];
        }
        Jet { c: b }
    }
}

impl Add for Jet {
    type Output = Jet;
    fn add(self, rhs: Jet) -> Jet {
        let mut c = self.c;
        c.iter_mut().zip(rhs.c).for_each(|(a, b)| *a += b);
        Jet { c }
    }
}

impl Sub for Jet {
    type Output = Jet;
    fn sub(self, rhs: Jet) -> Jet {
        let mut c = self.c;
        c.iter_mut().zip(rhs.c).for_each(|(a, b)| *a -= b);
        Jet { c }
    }
}

impl Neg for Jet {
    type Output = Jet;
    fn neg(self) -> Jet {
        self.scale(-1.0)
    }
}

impl Mul for Jet {
    type Output = Jet;
    fn mul(self, rhs: Jet) -> Jet {
        let mut c = [0.0; JET_LEN];
        for i in 0..JET_LEN {
            for j in 0..JET_LEN - i {
                c[i + j] += self.c[i] * rhs.c[j];
            }
        }
        Jet { c }
    }
}

impl Mul<f64> for Jet {
    type Output = Jet;
    fn mul(self, rhs: f64) -> Jet {
        self.scale(rhs)
    }
}

impl Div for Jet {
    type Output = Jet;
    #[allow(clippy::suspicious_arithmetic_impl)]
    fn div(self, rhs: Jet) -> Jet {
        self * rhs.recip()
    }
}
