//! Explicit Runge–Kutta steppers over fixed-size state arrays.

use std::cell::RefCell;

use ode_solvers::{Dopri5, OutputType, SVector, System};

use crate::error::{Error, Result};

fn axpy<const N: usize>(y: &[f64; N], h: f64, k: &[f64; N]) -> [f64; N] {
    let mut out = *y;
    for i in 0..N {
        out[i] += h * k[i];
    }
    out
}

/// One classical fourth-order Runge–Kutta step.
pub fn rk4_step<const N: usize, F>(f: &mut F, t: f64, y: &[f64; N], h: f64) -> Result<[f64; N]>
where
    F: FnMut(f64, &[f64; N]) -> Result<[f64; N]>,
{
    let k1 = f(t, y)?;
    let k2 = f(t + 0.5 * h, &axpy(y, 0.5 * h, &k1))?;
    let k3 = f(t + 0.5 * h, &axpy(y, 0.5 * h, &k2))?;
    let k4 = f(t + h, &axpy(y, h, &k3))?;
    let mut out = *y;
    for i in 0..N {
        out[i] += h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
    }
    Ok(out)
}

struct Rhs<'a, const N: usize, F, G> {
    f: RefCell<&'a mut F>,
    accept: G,
    failure: &'a RefCell<Option<Error>>,
}

impl<const N: usize, F, G> System<f64, SVector<f64, N>> for Rhs<'_, N, F, G>
where
    F: FnMut(f64, &[f64; N]) -> Result<[f64; N]>,
    G: FnMut(f64, &[f64; N]),
{
    fn system(&self, t: f64, y: &SVector<f64, N>, dy: &mut SVector<f64, N>) {
        if self.failure.borrow().is_some() {
            dy.fill(0.0);
            return;
        }
        match (self.f.borrow_mut())(t, &(*y).into()) {
            Ok(v) => *dy = SVector::from(v),
            Err(e) => {
                dy.fill(0.0);
                *self.failure.borrow_mut() = Some(e);
            }
        }
    }

    fn solout(&mut self, t: f64, y: &SVector<f64, N>, _dy: &SVector<f64, N>) -> bool {
        if self.failure.borrow().is_some() {
            return true;
        }
        (self.accept)(t, &(*y).into());
        false
    }
}

/// Adaptive Dormand–Prince 5(4) integration from `t0` to `t1`.
///
/// Calls `accept(t, y)` at `t0` and after every accepted step; the last
/// call is at `t1`. Absolute and relative tolerances are both `tol`. An
/// error from `f` stops the integration and is returned.
pub fn dopri5<const N: usize, F, G>(
    f: &mut F,
    t0: f64,
    y0: [f64; N],
    t1: f64,
    tol: f64,
    mut accept: G,
) -> Result<[f64; N]>
where
    F: FnMut(f64, &[f64; N]) -> Result<[f64; N]>,
    G: FnMut(f64, &[f64; N]),
{
    accept(t0, &y0);
    let failure = RefCell::new(None);
    let rhs = Rhs { f: RefCell::new(f), accept, failure: &failure };
    let mut solver = Dopri5::new(rhs, t0, t1, 0.0, SVector::from(y0), tol, tol);
    solver.set_output(OutputType::Sparse);
    let outcome = solver.integrate();
    let y_end = solver.y_out().last().map(|y| (*y).into()).unwrap_or(y0);
    drop(solver);
    if let Some(e) = failure.into_inner() {
        return Err(e);
    }
    outcome.map_err(|e| Error::AdaptiveIntegration(e.to_string()))?;
    Ok(y_end)
}
