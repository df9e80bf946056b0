//! Structure invariants of the adapted coframing and numerical checks of the
//! structure equations.
//!
//! Directional derivatives use a single index set: `f_k` is the derivative
//! along the dual vector `e_k`, `k ∈ {1, 2, 3}`, and `4` stands for the
//! φ-direction. On the geodesic bundle the direction `e_1` is the geodesic
//! direction, so along a geodesic `f_1 = df/ds`.

use crate::error::{Error, Result};
use crate::indicatrix::{evaluate_profile, require_convex, IndicatrixProfile};
use crate::jet::Jet;

/// Values of the torsion functions and the derivative symbols that enter
/// the Jacobi coefficients. Every entry defaults to zero.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct InvariantTable {
    pub i: f64,
    pub k: f64,
    pub a1: f64,
    pub a2: f64,
    pub j1: f64,
    pub j2: f64,
    pub s0: f64,
    pub s1: f64,
    pub s2: f64,

    pub i_1: f64,
    pub i_3: f64,
    pub i_4: f64,
    pub i_41: f64,
    pub i_411: f64,
    pub i_44: f64,
    pub i_444: f64,

    pub j1_1: f64,
    pub j1_4: f64,
    pub j1_41: f64,
    pub j2_1: f64,
    pub j2_4: f64,
    pub j2_41: f64,

    pub a1_1: f64,
    pub a1_4: f64,
    pub a1_41: f64,
    pub a1_11: f64,
    pub a2_1: f64,
    pub a2_3: f64,
    pub a2_4: f64,
    pub a2_41: f64,
    pub a2_11: f64,

    pub k_1: f64,
    pub k_3: f64,
    pub k_11: f64,

    pub s0_1: f64,
    pub s0_4: f64,
    pub s2_1: f64,
    pub s2_4: f64,
}

impl InvariantTable {
    /// Table of a structure with constant `I` and every other entry zero.
    pub fn constant_i(i: f64) -> Self {
        InvariantTable { i, ..Default::default() }
    }
}

/// The four 1-forms of a coframing at one point, as components in the
/// coordinate cobasis `(dx, dy, dz, dθ)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CoframeSample {
    pub point: [f64; 4],
    pub eta1: [f64; 4],
    pub eta2: [f64; 4],
    pub eta3: [f64; 4],
    pub phi: [f64; 4],
}

impl CoframeSample {
    pub fn forms(&self) -> [[f64; 4]; 4] {
        [self.eta1, self.eta2, self.eta3, self.phi]
    }

    pub fn determinant(&self) -> f64 {
        det4(&self.forms())
    }

    /// Whether the four forms are linearly independent, judged against the
    /// product of their norms.
    pub fn is_coframe(&self) -> bool {
        let scale: f64 = self.forms().iter().map(norm).product();
        scale > 0.0 && self.determinant().abs() > 1e-12 * scale
    }
}

fn norm(v: &[f64; 4]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

fn det3(m: [[f64; 3]; 3]) -> f64 {
    m[0][0] * (m[1][1] * m[2][2] - m[1][2] * m[2][1]) - m[0][1] * (m[1][0] * m[2][2] - m[1][2] * m[2][0])
        + m[0][2] * (m[1][0] * m[2][1] - m[1][1] * m[2][0])
}

fn det4(m: &[[f64; 4]; 4]) -> f64 {
    (0..4)
        .map(|col| {
            let mut minor = [[0.0; 3]; 3];
            for r in 1..4 {
                let mut cc = 0;
                for (c, &v) in m[r].iter().enumerate() {
                    if c != col {
                        minor[r - 1][cc] = v;
                        cc += 1;
                    }
                }
            }
            let sign = if col % 2 == 0 { 1.0 } else { -1.0 };
            sign * m[0][col] * det3(minor)
        })
        .sum()
}

/// θ-jets of `r, r', r'', r'''`.
fn profile_jets(profile: &IndicatrixProfile, theta: f64) -> [Jet; 4] {
    let d = profile.derivative_table(theta);
    [
        Jet::from_derivatives(&d[0..]),
        Jet::from_derivatives(&d[1..]),
        Jet::from_derivatives(&d[2..]),
        Jet::from_derivatives(&d[3..]),
    ]
}

/// `I = −½ (r r''' + 3 r' r'' + 4 r r') / (√r (r + r'')^{3/2})` as a θ-jet.
fn i_jet(r: &[Jet; 4]) -> Jet {
    let [r0, r1, r2, r3] = *r;
    let num = r0 * r3 + (r1 * r2).scale(3.0) + (r0 * r1).scale(4.0);
    let den = r0.sqrt() * (r0 + r2).powf(1.5);
    (num / den).scale(-0.5)
}

/// The invariant `I` of the homogeneous structure with profile `r`.
pub fn heisenberg_i(profile: &IndicatrixProfile, theta: f64) -> Result<f64> {
    let d = evaluate_profile(profile, theta);
    require_convex(theta, &d)?;
    Ok(-0.5 * (d.r * d.r3 + 3.0 * d.r1 * d.r2 + 4.0 * d.r * d.r1) / (d.r.sqrt() * (d.r + d.r2).powf(1.5)))
}

/// Invariant table of the homogeneous structure on the indicatrix bundle:
/// `I` and its φ-derivatives, every other entry zero.
pub fn heisenberg_table(profile: &IndicatrixProfile, theta: f64) -> Result<InvariantTable> {
    require_convex(theta, &evaluate_profile(profile, theta))?;
    let r = profile_jets(profile, theta);
    let i = i_jet(&r);
    // dθ = √(r/(r + r'')) φ, so f_4 = √(r/(r + r'')) df/dθ.
    let to_phi = (r[0] / (r[0] + r[2])).sqrt();
    let i4 = to_phi * i.differentiate();
    let i44 = to_phi * i4.differentiate();
    let i444 = to_phi * i44.differentiate();
    Ok(InvariantTable {
        i: i.value(),
        i_4: i4.value(),
        i_44: i44.value(),
        i_444: i444.value(),
        ..Default::default()
    })
}

/// Invariant table at a point `(θ, λ)` of a geodesic, with the `,1`
/// derivatives taken along the geodesic direction.
///
/// On the homogeneous structure `I` depends on θ only, and along a geodesic
/// `φ = λ ds` and `dλ = I λ² ds`, which gives
/// `I_1 = λ I_4`, `I_41 = λ I_44`, `I_411 = λ² (I I_44 + I_444)`.
pub fn heisenberg_table_on_geodesic(profile: &IndicatrixProfile, theta: f64, lambda: f64) -> Result<InvariantTable> {
    let mut t = heisenberg_table(profile, theta)?;
    t.i_1 = lambda * t.i_4;
    t.i_41 = lambda * t.i_44;
    t.i_411 = lambda * lambda * (t.i * t.i_44 + t.i_444);
    Ok(t)
}

/// The 4-adapted coframe of the homogeneous structure at `(x, y, z, θ)`.
pub fn heisenberg_coframe(profile: &IndicatrixProfile, point: [f64; 4]) -> Result<CoframeSample> {
    let [x, y, _z, theta] = point;
    let d = evaluate_profile(profile, theta);
    require_convex(theta, &d)?;
    let (s, c) = theta.sin_cos();
    let q = (d.r * (d.r + d.r2)).sqrt();
    let w = d.r.powf(1.5) * (d.r + d.r2).sqrt();
    Ok(CoframeSample {
        point,
        eta1: [d.r * c - d.r1 * s, -(d.r * s + d.r1 * c), 0.0, 0.0],
        eta2: [q * s, q * c, 0.0, 0.0],
        eta3: contact_form(x, y, w),
        phi: [0.0, 0.0, 0.0, ((d.r + d.r2) / d.r).sqrt()],
    })
}

/// `scale · (dz + ½(x dy − y dx))`.
fn contact_form(x: f64, y: f64, scale: f64) -> [f64; 4] {
    [-0.5 * y * scale, 0.5 * x * scale, scale, 0.0]
}

/// The four families of constant-`I` structures, by the sign of `I² − 4`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ConstantICase {
    /// `I² > 4`
    Hyperbolic,
    /// `I² < 4`
    Oscillatory,
    /// `I = 2`
    ParabolicPlus,
    /// `I = −2`
    ParabolicMinus,
}

impl ConstantICase {
    pub fn name(self) -> &'static str {
        match self {
            ConstantICase::Hyperbolic => "hyperbolic",
            ConstantICase::Oscillatory => "oscillatory",
            ConstantICase::ParabolicPlus => "parabolic_plus",
            ConstantICase::ParabolicMinus => "parabolic_minus",
        }
    }

    pub fn parse(name: &str) -> Option<Self> {
        [Self::Hyperbolic, Self::Oscillatory, Self::ParabolicPlus, Self::ParabolicMinus]
            .into_iter()
            .find(|c| c.name() == name)
    }

    /// The case that `I` belongs to.
    pub fn classify(i: f64) -> Self {
        const EPS: f64 = 1e-12;
        if (i - 2.0).abs() <= EPS {
            ConstantICase::ParabolicPlus
        } else if (i + 2.0).abs() <= EPS {
            ConstantICase::ParabolicMinus
        } else if i * i > 4.0 {
            ConstantICase::Hyperbolic
        } else {
            ConstantICase::Oscillatory
        }
    }
}

/// Explicit coframe of the constant-`I` structure with integration
/// constants `c₁ = c₂ = 1`.
pub fn constant_i_coframe(i: f64, case: ConstantICase, point: [f64; 4]) -> Result<CoframeSample> {
    if ConstantICase::classify(i) != case {
        return Err(Error::CaseMismatch { i, case: case.name() });
    }
    let [x, y, _z, t] = point;
    let phi = [0.0, 0.0, 0.0, 1.0];
    let sample = match case {
        ConstantICase::Hyperbolic => {
            let disc = (i * i - 4.0).sqrt();
            let (r1, r2) = (0.5 * (-i + disc), 0.5 * (-i - disc));
            let (e1, e2) = ((r1 * t).exp(), (r2 * t).exp());
            CoframeSample {
                point,
                eta1: [e1, e2, 0.0, 0.0],
                eta2: [-r1 * e1, -r2 * e2, 0.0, 0.0],
                eta3: contact_form(x, y, (-i * t).exp() * disc),
                phi,
            }
        }
        ConstantICase::Oscillatory => {
            let r = 0.5 * (4.0 - i * i).sqrt();
            let e = (-0.5 * i * t).exp();
            let (s, c) = (r * t).sin_cos();
            // η² = −∂η¹/∂θ, as required by dη¹ = η² ∧ φ.
            CoframeSample {
                point,
                eta1: [e * c, e * s, 0.0, 0.0],
                eta2: [0.5 * e * (i * c + 2.0 * r * s), 0.5 * e * (i * s - 2.0 * r * c), 0.0, 0.0],
                eta3: contact_form(x, y, -r * (-i * t).exp()),
                phi,
            }
        }
        ConstantICase::ParabolicPlus => {
            let e = (-t).exp();
            CoframeSample {
                point,
                eta1: [e * (1.0 + t), -e * t, 0.0, 0.0],
                eta2: [e * t, e * (1.0 - t), 0.0, 0.0],
                eta3: contact_form(x, y, (-2.0 * t).exp()),
                phi,
            }
        }
        ConstantICase::ParabolicMinus => {
            let e = t.exp();
            CoframeSample {
                point,
                eta1: [e * (1.0 - t), -e * t, 0.0, 0.0],
                eta2: [e * t, e * (1.0 + t), 0.0, 0.0],
                eta3: contact_form(x, y, (2.0 * t).exp()),
                phi,
            }
        }
    };
    Ok(sample)
}

/// Largest change of any coframe component under `θ ↦ θ + 2π`, relative to
/// the component scale. Zero exactly when the fiber closes up.
pub fn fiber_periodicity_defect(i: f64, case: ConstantICase, point: [f64; 4]) -> Result<f64> {
    let a = constant_i_coframe(i, case, point)?;
    let mut shifted = point;
    shifted[3] += std::f64::consts::TAU;
    let b = constant_i_coframe(i, case, shifted)?;
    let scale = a.forms().iter().map(norm).fold(0.0, f64::max);
    let diff = a
        .forms()
        .iter()
        .zip(b.forms().iter())
        .flat_map(|(u, v)| u.iter().zip(v.iter()).map(|(p, q)| (p - q).abs()))
        .fold(0.0, f64::max);
    Ok(diff / scale)
}

type TwoForm = [[f64; 4]; 4];

fn wedge(a: &[f64; 4], b: &[f64; 4]) -> TwoForm {
    let mut w = [[0.0; 4]; 4];
    for p in 0..4 {
        for q in 0..4 {
            w[p][q] = a[p] * b[q] - a[q] * b[p];
        }
    }
    w
}

fn combine(terms: &[(f64, TwoForm)]) -> TwoForm {
    let mut out = [[0.0; 4]; 4];
    for (c, w) in terms {
        for p in 0..4 {
            for q in 0..4 {
                out[p][q] += c * w[p][q];
            }
        }
    }
    out
}

/// Right-hand sides of the structure equations for `dη¹, dη², dη³, dφ`.
fn structure_rhs(t: &InvariantTable, f: &CoframeSample) -> [TwoForm; 4] {
    let (e1, e2, e3, ph) = (&f.eta1, &f.eta2, &f.eta3, &f.phi);
    let half_ik = 0.5 * t.i * t.k;
    [
        combine(&[
            (1.0, wedge(e2, ph)),
            (t.a1, wedge(e2, e3)),
            (t.a2 + half_ik, wedge(e3, e1)),
            (t.j1, wedge(e3, ph)),
        ]),
        combine(&[
            (-1.0, wedge(e1, ph)),
            (t.a2 - half_ik, wedge(e2, e3)),
            (-t.a1, wedge(e3, e1)),
            (t.j2, wedge(e3, ph)),
            (t.i, wedge(e2, ph)),
        ]),
        combine(&[(1.0, wedge(e1, e2)), (t.i, wedge(e3, ph))]),
        combine(&[
            (t.s0, wedge(e3, ph)),
            (t.s1, wedge(e2, e3)),
            (t.s2, wedge(e3, e1)),
            (-t.j1, wedge(e1, ph)),
            (-2.0 * t.j2, wedge(e2, ph)),
            (t.k, wedge(e1, e2)),
        ]),
    ]
}

/// Largest absolute deviation between the numerical exterior derivatives of
/// a coframing and the right-hand sides of its structure equations, over all
/// four equations and the six coordinate 2-form slots.
///
/// `dηⁱ` is assembled from central differences of the component functions
/// with step `fd_step`.
pub fn structure_residual<C, T>(coframe: C, table: T, point: [f64; 4], fd_step: f64) -> Result<f64>
where
    C: Fn([f64; 4]) -> Result<CoframeSample>,
    T: Fn([f64; 4]) -> Result<InvariantTable>,
{
    if !(1e-7..=1e-3).contains(&fd_step) {
        return Err(Error::InvalidStep(fd_step));
    }
    let center = coframe(point)?;
    if !center.is_coframe() {
        return Err(Error::SingularCoframe { point, det: center.determinant() });
    }
    // partial[a][form][component] = ∂_a (form component)
    let mut partial = [[[0.0; 4]; 4]; 4];
    for (a, slot) in partial.iter_mut().enumerate() {
        let mut plus = point;
        let mut minus = point;
        plus[a] += fd_step;
        minus[a] -= fd_step;
        let fp = coframe(plus)?.forms();
        let fm = coframe(minus)?.forms();
        for form in 0..4 {
            for comp in 0..4 {
                slot[form][comp] = (fp[form][comp] - fm[form][comp]) / (2.0 * fd_step);
            }
        }
    }
    let rhs = structure_rhs(&table(point)?, &center);
    let mut worst = 0.0_f64;
    for form in 0..4 {
        for a in 0..4 {
            for b in (a + 1)..4 {
                let d_ab = partial[a][form][b] - partial[b][form][a];
                worst = worst.max((d_ab - rhs[form][a][b]).abs());
            }
        }
    }
    Ok(worst)
}
