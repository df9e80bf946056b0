use std::f64::consts::{FRAC_PI_2, PI, TAU};
use std::io::Write;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use subfinsler::geodesics::{conserved_quantity, fiber_period};
use subfinsler::invariants::fiber_periodicity_defect;
use subfinsler::jacobi::conjugate_points_csv;
use subfinsler::oracle::{
    closed_projection, dido_direct_search_with, dido_stationarity_path, hausdorff_distance, DirectSearchOptions,
    Orientation, PROJECTION_NODES,
};
use subfinsler::{
    check_strong_convexity, conjugate_points, constant_i_coframe, dido_stationarity, finsler_length, heisenberg_coframe,
    heisenberg_table, index, integrate, jacobi_coefficients, limacon_closed_form, projection_closure, randers_closed_form,
    rund_average, structure_residual, DiscreteHorizontalPath, Error, GeodesicState, GeodesicTrace, IndicatrixProfile,
    IntegratorSettings, InvariantTable,
};

use crate::config::{RunConfig, Suite};
use crate::svg::{parse_loop_csv, parse_trace_csv, render_axonometric, render_projection};
use crate::{CliError, Output};

macro_rules! say {
    ($w:expr, $($t:tt)*) => {
        writeln!($w, $($t)*).map_err(|source| CliError::Io { path: "<stdout>".into(), source })?
    };
}

fn one_turn(profile: &IndicatrixProfile, theta: f64, lambda: f64) -> Result<GeodesicTrace, CliError> {
    let start = GeodesicState::new(0.0, 0.0, 0.0, theta, lambda);
    let len = fiber_period(profile, &start)?;
    Ok(integrate(profile, start, &IntegratorSettings::fixed(1e-3, 1.02 * len))?)
}

pub fn invariants(config: &RunConfig, out: &Output, w: &mut dyn Write) -> Result<(), CliError> {
    let profile = config.metric.profile()?;
    let grid = config.invariants.grid;
    if grid < 16 {
        return Err(CliError::Usage(format!("invariants.grid = {grid} < 16")));
    }
    let conv = check_strong_convexity(&profile, grid)?;
    say!(w, "metric {}", profile.label());
    say!(w, "strong convexity: min r(r + r'') = {:.6e} at theta = {:.6}", conv.min_value, conv.argmin);
    if !conv.ok {
        return Err(Error::ConvexityViolation { theta: conv.argmin, value: conv.min_value }.into());
    }
    let mut csv = String::from("theta,I,I4\n");
    let mut rows = Vec::with_capacity(grid);
    for k in 0..grid {
        let theta = TAU * k as f64 / grid as f64;
        let t = heisenberg_table(&profile, theta)?;
        csv.push_str(&format!("{theta:.9e},{:.9e},{:.9e}\n", t.i, t.i_4));
        rows.push((theta, t.i, t.i_4));
    }
    let avg = rund_average(&profile)?;
    say!(w, "average of I over the indicatrix: {avg:.3e}");
    let max_i = rows.iter().map(|r| r.1.abs()).fold(0.0, f64::max);
    say!(w, "max |I| on the grid: {max_i:.6e}");
    say!(w, "{:>12} {:>16} {:>16}", "theta", "I", "I4");
    let stride = (grid / 12).max(1);
    for &(theta, i, i4) in rows.iter().step_by(stride) {
        say!(w, "{theta:>12.6} {i:>16.9e} {i4:>16.9e}");
    }
    let path = out.write("invariants.csv", &csv)?;
    say!(w, "wrote {}", path.display());
    Ok(())
}

pub fn geodesic(config: &RunConfig, out: &Output, w: &mut dyn Write) -> Result<(), CliError> {
    let profile = config.metric.profile()?;
    let g = &config.geodesic;
    if g.initial.is_empty() {
        return Err(CliError::Usage("geodesic.initial is empty".into()));
    }
    say!(w, "metric {}", profile.label());
    let mut curves = Vec::new();
    for (k, ic) in g.initial.iter().enumerate() {
        let start = GeodesicState::new(ic.x, ic.y, ic.z, ic.theta, ic.lambda);
        let period = if ic.lambda != 0.0 { Some(fiber_period(&profile, &start)?) } else { None };
        let length = g
            .length
            .or(period)
            .ok_or_else(|| CliError::Usage(format!("geodesic {k}: lambda = 0 needs geodesic.length")))?;
        let settings = match g.tolerance {
            Some(tol) => IntegratorSettings::adaptive(tol, length),
            None => IntegratorSettings::fixed(g.step, length),
        };
        let trace = integrate(&profile, start, &settings)?;
        let end = trace.final_state();
        say!(
            w,
            "geodesic {k}: theta0 = {:.6}, lambda0 = {:.6}, length = {:.9}, conserved = {:.9e}, drift = {:.2e}",
            ic.theta,
            ic.lambda,
            length,
            conserved_quantity(&profile, &start),
            trace.max_conserved_drift
        );
        say!(w, "  end: x = {:.9}, y = {:.9}, z = {:.9}, theta = {:.9}", end.x, end.y, end.z, end.theta);
        if period.is_some_and(|p| length >= p) {
            let c = projection_closure(&trace)?;
            say!(
                w,
                "  one turn: closes = {}, gap = {:.2e}, area = {:.9}, z gain = {:.9}, diameter = {:.9}",
                c.closes,
                c.gap,
                c.enclosed_area,
                c.z_gain,
                c.diameter
            );
        }
        let csv = trace.to_csv();
        let path = out.write(&format!("geodesic_{k}.csv"), &csv)?;
        say!(w, "  wrote {}", path.display());
        if out.svg {
            curves.push(parse_trace_csv(&csv)?);
        }
    }
    if out.svg {
        let title = format!("geodesics, {}", profile.label());
        for (name, svg) in [
            ("geodesic_xy.svg", render_projection(&title, &curves)),
            ("geodesic_3d.svg", render_axonometric(&title, &curves)),
        ] {
            let path = out.write(name, &svg)?;
            say!(w, "wrote {}", path.display());
        }
    }
    Ok(())
}

pub fn conjugate(config: &RunConfig, out: &Output, w: &mut dyn Write) -> Result<(), CliError> {
    let profile = config.metric.profile()?;
    let c = &config.conjugate;
    if c.length.is_nan() || c.length <= 0.0 {
        return Err(CliError::Usage(format!("conjugate.length = {} must be positive", c.length)));
    }
    let trace = integrate(&profile, GeodesicState::new(0.0, 0.0, 0.0, c.theta, c.lambda), &IntegratorSettings::fixed(c.step, c.length))?;
    let coeffs = jacobi_coefficients(&profile, &trace)?;
    let points = conjugate_points(&coeffs, c.length)?;
    let idx = index(&coeffs, c.length)?;
    say!(w, "metric {}, theta0 = {}, lambda0 = {}, length = {}", profile.label(), c.theta, c.lambda, c.length);
    if points.is_empty() {
        say!(w, "no conjugate points");
    }
    for p in &points {
        say!(w, "conjugate point at s = {:.10}, multiplicity {}", p.c, p.multiplicity);
    }
    say!(w, "index {idx}");
    let path = out.write("conjugate.csv", &conjugate_points_csv(&points))?;
    say!(w, "wrote {}", path.display());
    Ok(())
}

struct Checks {
    failed: Vec<String>,
}

impl Checks {
    fn record(&mut self, w: &mut dyn Write, name: &str, value: f64, tol: f64, below: bool) -> Result<(), CliError> {
        let ok = if below { value < tol } else { value > tol };
        let cmp = if below { "<" } else { ">" };
        say!(w, "{} {name}: {value:.3e} ({cmp} {tol:.0e})", if ok { "ok  " } else { "FAIL" });
        if !ok {
            self.failed.push(name.to_string());
        }
        Ok(())
    }
}

pub fn verify(config: &RunConfig, _out: &Output, w: &mut dyn Write) -> Result<(), CliError> {
    let v = &config.verify;
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut checks = Checks { failed: Vec::new() };
    match v.suite {
        Suite::Structure => {
            let tol = v.tolerance.unwrap_or(1e-6);
            let n = v.samples.unwrap_or(50);
            let constant = config.metric.constant_i()?;
            let profile = if constant.is_none() { Some(config.metric.profile()?) } else { None };
            match (constant, &profile) {
                (Some((i, case)), _) => {
                    say!(w, "structure equations, constant I = {i} ({})", case.name());
                    let open = fiber_periodicity_defect(i, case, [0.0; 4])?;
                    say!(w, "coframe change under theta -> theta + 2pi: {open:.3e}");
                }
                (None, Some(p)) => say!(w, "structure equations, metric {}", p.label()),
                (None, None) => unreachable!(),
            }
            for k in 0..n {
                let point = [0; 4].map(|_| rng.random_range(-1.0..1.0));
                let r = match (constant, &profile) {
                    (Some((i, case)), _) => structure_residual(
                        |p| constant_i_coframe(i, case, p),
                        |_| Ok(InvariantTable::constant_i(i)),
                        point,
                        1e-5,
                    )?,
                    (None, Some(p)) => structure_residual(|q| heisenberg_coframe(p, q), |q| heisenberg_table(p, q[3]), point, 1e-5)?,
                    (None, None) => unreachable!(),
                };
                checks.record(w, &format!("point {k} {point:.4?}"), r, tol, true)?;
            }
        }
        Suite::Conserved => {
            let profile = config.metric.profile()?;
            let tol = v.tolerance.unwrap_or(1e-8);
            say!(w, "conserved quantity over s = 20, metric {}", profile.label());
            for k in 0..v.samples.unwrap_or(20) {
                let start = GeodesicState::new(
                    rng.random_range(-1.0..1.0),
                    rng.random_range(-1.0..1.0),
                    rng.random_range(-1.0..1.0),
                    rng.random_range(0.0..TAU),
                    rng.random_range(-2.0..2.0),
                );
                let trace = integrate(&profile, start, &IntegratorSettings::fixed(1e-3, 20.0))?;
                let name = format!("initial {k} (theta = {:.4}, lambda = {:.4})", start.theta, start.lambda);
                checks.record(w, &name, trace.max_conserved_drift, tol, true)?;
            }
        }
        Suite::Oracle => {
            let profile = config.metric.profile()?;
            let tol = v.tolerance.unwrap_or(1e-6);
            let randers = config.metric.randers_b();
            if randers.is_none() && profile != IndicatrixProfile::Limacon {
                return Err(CliError::Usage(format!("no closed-form geodesics for {}", profile.label())));
            }
            say!(w, "closed form against integration, metric {}, lambda0 = {}", profile.label(), v.lambda);
            for theta0 in [0.0, FRAC_PI_2, PI] {
                let trace = one_turn(&profile, theta0, v.lambda)?;
                let init = trace.initial;
                let mut err = 0.0_f64;
                for p in &trace.samples {
                    let d = match randers {
                        Some(b) => {
                            let q = randers_closed_form(b, &init, p.theta)?;
                            (p.x - q[0]).abs().max((p.y - q[1]).abs()).max((p.z - q[2]).abs())
                        }
                        None => {
                            let q = limacon_closed_form(&init, p.theta)?;
                            (p.x - q[0]).abs().max((p.y - q[1]).abs())
                        }
                    };
                    err = err.max(d);
                }
                checks.record(w, &format!("theta0 = {theta0:.6}"), err, tol, true)?;
            }
        }
        Suite::Dido => {
            let profile = config.metric.profile()?;
            let tol = v.tolerance.unwrap_or(1e-3);
            let count = v.samples.unwrap_or(20);
            say!(w, "isoperimetric checks, metric {}, lambda0 = {}", profile.label(), v.lambda);
            let trace = one_turn(&profile, 0.0, v.lambda)?;
            let rep = dido_stationarity(&profile, &trace, count, 1e-3, config.seed)?;
            checks.record(w, "first-order length defect of the geodesic projection", rep.max_first_order_defect, tol, true)?;
            let proj = closed_projection(&trace, PROJECTION_NODES)?;
            let target = finsler_length(&profile, &proj)?;
            let (found, note) = search(&profile, proj.signed_area(), 128)?;
            let got = finsler_length(&profile, &found)?;
            checks.record(w, &format!("relative length gap of the direct search{note}"), (got - target).abs() / target, 1e-2, true)?;
        }
    }
    if checks.failed.is_empty() {
        say!(w, "all checks passed");
        Ok(())
    } else {
        Err(CliError::Verification(checks.failed.join("; ")))
    }
}

/// Direct search for a loop of the given signed area; on the iteration cap
/// the best iterate is used and flagged.
fn search(profile: &IndicatrixProfile, signed_area: f64, nodes: usize) -> Result<(DiscreteHorizontalPath, &'static str), CliError> {
    let orientation = if signed_area < 0.0 { Orientation::Clockwise } else { Orientation::CounterClockwise };
    let options = DirectSearchOptions { orientation, ..Default::default() };
    match dido_direct_search_with(profile, signed_area.abs(), nodes, &options) {
        Ok(p) => Ok((p, "")),
        Err(Error::NoConvergence { best, .. }) => Ok((*best, " (iteration cap reached)")),
        Err(e) => Err(e.into()),
    }
}

pub fn dido(config: &RunConfig, out: &Output, w: &mut dyn Write) -> Result<(), CliError> {
    let profile = config.metric.profile()?;
    let d = &config.dido;
    say!(w, "metric {}", profile.label());
    let reference = match d.area {
        Some(_) => None,
        None => {
            let trace = one_turn(&profile, d.theta, d.lambda)?;
            Some(closed_projection(&trace, PROJECTION_NODES)?)
        }
    };
    let signed_area = match (&reference, d.area) {
        (Some(r), _) => r.signed_area(),
        (None, Some(a)) => -a,
        (None, None) => unreachable!(),
    };
    let (found, note) = search(&profile, signed_area, d.nodes)?;
    let length = finsler_length(&profile, &found)?;
    say!(w, "direct search: {} nodes, area {:.9}, length {:.9}{note}", d.nodes, found.signed_area().abs(), length);
    let rep = dido_stationarity_path(&profile, &found, d.perturbations, d.epsilon, config.seed)?;
    say!(w, "first-order length defect of the optimized loop: {:.3e}", rep.max_first_order_defect);
    let mut files = vec![("dido.csv", found.to_csv())];
    if let Some(r) = &reference {
        let target = finsler_length(&profile, r)?;
        let c = |p: &DiscreteHorizontalPath| {
            let m = p.centroid();
            p.translated([-m[0], -m[1]])
        };
        say!(
            w,
            "geodesic projection (theta0 = {}, lambda0 = {}): length {:.9}, relative gap {:.3e}, Hausdorff distance {:.3e}",
            d.theta,
            d.lambda,
            target,
            (length - target).abs() / target,
            hausdorff_distance(&c(&found), &c(r))
        );
        files.push(("dido_geodesic.csv", c(r).translated(found.centroid()).to_csv()));
    }
    let mut curves = Vec::new();
    for (name, csv) in &files {
        let path = out.write(name, csv)?;
        say!(w, "wrote {}", path.display());
        if out.svg {
            curves.push(parse_loop_csv(csv)?);
        }
    }
    if out.svg {
        let path = out.write("dido.svg", &render_projection(&format!("isoperimetric loop, {}", profile.label()), &curves))?;
        say!(w, "wrote {}", path.display());
    }
    Ok(())
}
