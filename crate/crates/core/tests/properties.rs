mod common;

use std::f64::consts::{PI, TAU};

use proptest::prelude::*;

use subfinsler::geodesics::{integrate, GeodesicState, IntegratorSettings};
use subfinsler::invariants::heisenberg_i;
use subfinsler::jacobi::solve_kernel;
use subfinsler::oracle::{closed_projection, dido_direct_search_from, DirectSearchOptions};
use subfinsler::*;

fn config(cases: u32) -> ProptestConfig {
    ProptestConfig { cases, ..ProptestConfig::default() }
}

/// Strongly convex Fourier profiles: `1 + Σ_{n ≤ 3} (aₙ cos nθ + bₙ sin nθ)`
/// with small coefficients, so `r + r'' ≥ 1/4`.
fn fourier_profile() -> impl Strategy<Value = IndicatrixProfile> {
    (prop::array::uniform3(-0.03..0.03f64), prop::array::uniform3(-0.03..0.03f64)).prop_map(|(a, b)| {
        IndicatrixProfile::fourier(vec![1.0, a[0], a[1], a[2]], b.to_vec()).unwrap()
    })
}

fn any_profile() -> impl Strategy<Value = IndicatrixProfile> {
    prop_oneof![
        Just(IndicatrixProfile::Flat),
        (0.05..0.95f64).prop_map(|b| IndicatrixProfile::randers(b).unwrap()),
        Just(IndicatrixProfile::Limacon),
        fourier_profile(),
    ]
}

fn unit_point() -> impl Strategy<Value = [f64; 4]> {
    prop::array::uniform4(-1.0..1.0f64)
}

// Indicatrix

proptest! {
    #![proptest_config(config(64))]

    #[test]
    fn profile_derivatives_match_differences(profile in any_profile(), theta in 0.0..TAU) {
        let h = 1e-4;
        let d = profile.derivative_table(theta);
        for k in 0..3 {
            let fd = (profile.derivative(theta + h, k) - profile.derivative(theta - h, k)) / (2.0 * h);
            prop_assert!((fd - d[k + 1]).abs() < 1e-6, "k = {k}: {fd} vs {}", d[k + 1]);
        }
    }

    #[test]
    fn randers_convexity_minimum(b in 0.01..0.99f64) {
        let rep = check_strong_convexity(&IndicatrixProfile::randers(b).unwrap(), 64).unwrap();
        prop_assert!(rep.ok);
        prop_assert!((rep.min_value - (1.0 - b)).abs() < 1e-12);
    }

    #[test]
    fn average_of_i_vanishes(profile in fourier_profile()) {
        prop_assert!(rund_average(&profile).unwrap().abs() < 1e-9);
    }

    #[test]
    fn fiber_derivative_of_i(profile in any_profile(), theta in 0.0..TAU) {
        let h = 1e-4;
        let d = evaluate_profile(&profile, theta);
        let di = (heisenberg_i(&profile, theta + h).unwrap() - heisenberg_i(&profile, theta - h).unwrap()) / (2.0 * h);
        let t = heisenberg_table(&profile, theta).unwrap();
        prop_assert!((t.i_4 - (d.r / (d.r + d.r2)).sqrt() * di).abs() < 1e-6);
    }

    #[test]
    fn finsler_norm_is_positively_homogeneous(profile in any_profile(), v in prop::array::uniform2(-2.0..2.0f64), t in 0.01..10.0f64) {
        let n = finsler_norm(&profile, v);
        prop_assert!((finsler_norm(&profile, [t * v[0], t * v[1]]) - t * n).abs() <= 1e-12 * (1.0 + t * n));
    }
}

// Invariants

proptest! {
    #![proptest_config(config(64))]

    #[test]
    fn heisenberg_structure_equations(profile in any_profile(), point in unit_point()) {
        let r = structure_residual(|p| heisenberg_coframe(&profile, p), |p| heisenberg_table(&profile, p[3]), point, 1e-5).unwrap();
        prop_assert!(r < 1e-6, "residual {r}");
    }

    #[test]
    fn constant_i_structure_equations(i in -4.0..4.0f64, point in unit_point()) {
        prop_assume!((i.abs() - 2.0).abs() > 1e-3);
        let case = ConstantICase::classify(i);
        let r = structure_residual(|p| constant_i_coframe(i, case, p), |_| Ok(InvariantTable::constant_i(i)), point, 1e-5).unwrap();
        prop_assert!(r < 1e-6, "residual {r}");
    }
}

#[test]
fn coframes_are_invertible() {
    use rand::{Rng, SeedableRng};
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(11);
    let constant = [
        (3.0, ConstantICase::Hyperbolic),
        (0.5, ConstantICase::Oscillatory),
        (2.0, ConstantICase::ParabolicPlus),
        (-2.0, ConstantICase::ParabolicMinus),
    ];
    for _ in 0..100 {
        let p = [0; 4].map(|_| rng.random_range(-3.0..3.0));
        for profile in common::builtin_profiles() {
            assert!(heisenberg_coframe(&profile, p).unwrap().is_coframe());
        }
        for (i, case) in constant {
            assert!(constant_i_coframe(i, case, p).unwrap().is_coframe());
        }
    }
}

// Geodesics

proptest! {
    #![proptest_config(config(24))]

    #[test]
    fn fiber_angle_is_monotone(profile in any_profile(), theta0 in 0.0..TAU, lambda0 in 0.1..2.0f64, sign in prop::bool::ANY) {
        let l0 = if sign { lambda0 } else { -lambda0 };
        let t = integrate(&profile, GeodesicState::new(0.0, 0.0, 0.0, theta0, l0), &IntegratorSettings::fixed(1e-2, 5.0)).unwrap();
        for w in t.samples.windows(2) {
            prop_assert!((w[1].theta - w[0].theta) * l0.signum() > 0.0);
        }
    }

    #[test]
    fn even_profiles_give_unit_speed(b in 0.0..0.95f64, theta0 in 0.0..TAU, lambda0 in -2.0..2.0f64, s in 0.0..5.0f64) {
        let profile = if b == 0.0 { IndicatrixProfile::Flat } else { IndicatrixProfile::randers(b).unwrap() };
        let t = integrate(&profile, GeodesicState::new(0.1, -0.2, 0.3, theta0, lambda0), &IntegratorSettings::fixed(1e-2, 5.0)).unwrap();
        let st = t.state_at(s).unwrap();
        let v = geodesic_rhs(&profile, &st).unwrap();
        prop_assert!((finsler_norm(&profile, [v[0], v[1]]) - 1.0).abs() < 1e-9);
    }

    #[test]
    fn zero_multiplier_gives_horizontal_line(profile in any_profile(), theta0 in 0.0..TAU) {
        let t = integrate(&profile, GeodesicState::new(0.0, 0.0, 0.0, theta0, 0.0), &IntegratorSettings::fixed(1e-2, 5.0)).unwrap();
        let r = evaluate_profile(&profile, theta0).r;
        for p in &t.samples {
            prop_assert!(p.z.abs() < 1e-12);
            prop_assert!((p.x - p.s * theta0.cos() / r).abs() < 1e-10);
            prop_assert!((p.y + p.s * theta0.sin() / r).abs() < 1e-10);
            prop_assert!(p.theta == theta0 && p.lambda == 0.0);
        }
    }

    #[test]
    fn randers_matches_closed_form(bi in 0usize..4, theta0 in 0.0..TAU, lambda0 in 0.2..1.5f64) {
        let b = [0.0, 0.25, 0.5, 0.9][bi];
        let profile = if b == 0.0 { IndicatrixProfile::Flat } else { IndicatrixProfile::randers(b).unwrap() };
        let t = common::turns(&profile, theta0, lambda0, 1.0);
        let init = t.initial;
        for p in t.samples.iter().step_by(97) {
            let w = randers_closed_form(b, &init, p.theta).unwrap();
            prop_assert!((p.x - w[0]).abs() < 1e-6 && (p.y - w[1]).abs() < 1e-6 && (p.z - w[2]).abs() < 1e-6);
        }
    }

    #[test]
    fn limacon_matches_closed_form(theta0 in 0.0..TAU, lambda0 in 0.5..1.5f64) {
        let t = common::turns(&IndicatrixProfile::Limacon, theta0, lambda0, 1.0);
        let init = t.initial;
        for p in t.samples.iter().step_by(97) {
            let w = limacon_closed_form(&init, p.theta).unwrap();
            prop_assert!((p.x - w[0]).abs() < 1e-6 && (p.y - w[1]).abs() < 1e-6);
        }
    }
}

// Jacobi

#[test]
fn kernel_solutions_satisfy_jacobi_equation() {
    use rand::{Rng, SeedableRng};
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(12);
    let len = 8.0;
    let mut worst = 0.0_f64;
    for profile in common::builtin_profiles().iter().cycle().take(200) {
        let theta0 = rng.random_range(0.0..TAU);
        let lambda0 = rng.random_range(0.3..1.5);
        let trace = integrate(profile, GeodesicState::new(0.0, 0.0, 0.0, theta0, lambda0), &IntegratorSettings::fixed(1e-3, len)).unwrap();
        let coeffs = jacobi_coefficients(profile, &trace).unwrap();
        let sol = solve_kernel(&coeffs, [rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)], len, 1e-3).unwrap();
        for w in sol.samples.windows(2).step_by(250) {
            let mid = 0.5 * (w[0].0 + w[1].0);
            let r = jacobi_apply(&coeffs, &sol.at(mid).unwrap(), mid).unwrap();
            worst = worst.max(r.abs());
        }
    }
    assert!(worst < 1e-7, "worst residual {worst}");
}

proptest! {
    #![proptest_config(config(12))]

    #[test]
    fn index_is_monotone_in_length(profile in any_profile(), theta0 in 0.0..TAU, lambda0 in 0.5..1.5f64) {
        let trace = integrate(&profile, GeodesicState::new(0.0, 0.0, 0.0, theta0, lambda0), &IntegratorSettings::fixed(1e-2, 1.0)).unwrap();
        let coeffs = jacobi_coefficients(&profile, &trace).unwrap();
        let mut last = 0;
        for k in 1..=6 {
            let idx = index(&coeffs, 2.5 * k as f64).unwrap();
            prop_assert!(idx >= last);
            last = idx;
        }
    }
}

// Oracle

fn loop_strategy() -> impl Strategy<Value = DiscreteHorizontalPath> {
    prop::collection::vec((0.5..1.5f64, -0.1..0.1f64), 8..40).prop_map(|v| {
        let n = v.len();
        DiscreteHorizontalPath::new(
            v.iter()
                .enumerate()
                .map(|(k, (rad, jitter))| {
                    let a = TAU * (k as f64 + jitter) / n as f64;
                    [rad * a.cos(), rad * a.sin()]
                })
                .collect(),
            true,
        )
    })
}

proptest! {
    #![proptest_config(config(64))]

    #[test]
    fn length_invariant_under_renoding(profile in any_profile(), path in loop_strategy(), at in 0usize..8, t in 0.05..0.95f64) {
        let before = finsler_length(&profile, &path).unwrap();
        let mut nodes = path.nodes.clone();
        let (a, b) = (nodes[at], nodes[(at + 1) % nodes.len()]);
        nodes.insert(at + 1, [a[0] + t * (b[0] - a[0]), a[1] + t * (b[1] - a[1])]);
        let after = finsler_length(&profile, &DiscreteHorizontalPath::new(nodes, true)).unwrap();
        prop_assert!((after - before).abs() < 1e-12 * before);
    }

    #[test]
    fn reversal_and_mirror_symmetries(path in loop_strategy(), b in 0.1..0.9f64) {
        let mut reversed = path.clone();
        reversed.nodes.reverse();
        let flat = IndicatrixProfile::Flat;
        prop_assert!((finsler_length(&flat, &path).unwrap() - finsler_length(&flat, &reversed).unwrap()).abs() < 1e-12);
        // Randers r is even in θ, so reflecting y ↦ −y preserves length;
        // the limaçon norm is not symmetric under v ↦ −v.
        let randers = IndicatrixProfile::randers(b).unwrap();
        let mirrored = DiscreteHorizontalPath::new(path.nodes.iter().map(|p| [p[0], -p[1]]).collect(), true);
        prop_assert!((finsler_length(&randers, &path).unwrap() - finsler_length(&randers, &mirrored).unwrap()).abs() < 1e-12);
    }
}

#[test]
fn asymmetric_norm_witness() {
    let profile = IndicatrixProfile::Limacon;
    assert!((finsler_norm(&profile, [1.0, 0.0]) - 0.25).abs() < 1e-15);
    assert!((finsler_norm(&profile, [-1.0, 0.0]) - 0.5).abs() < 1e-15);
    let segment = DiscreteHorizontalPath::new(vec![[0.0, 0.0], [1.0, 0.0]], false);
    let back = DiscreteHorizontalPath::new(vec![[1.0, 0.0], [0.0, 0.0]], false);
    assert!(finsler_length(&profile, &segment).unwrap() != finsler_length(&profile, &back).unwrap());
}

#[test]
fn polygon_length_converges_at_second_order() {
    for (profile, lambda0) in [(IndicatrixProfile::Flat, 1.0), (IndicatrixProfile::randers(0.5).unwrap(), 0.3)] {
        let t = common::turns(&profile, 0.0, lambda0, 1.05);
        let exact = projection_closure(&t).unwrap().period_arclength;
        let errs: Vec<f64> = [32, 64, 128, 256]
            .iter()
            .map(|&n| (finsler_length(&profile, &closed_projection(&t, n).unwrap()).unwrap() - exact).abs())
            .collect();
        for w in errs.windows(2) {
            let order = (w[0] / w[1]).log2();
            assert!(order >= 1.9, "{}: errors {errs:?}", profile.label());
        }
    }
}

#[test]
fn direct_search_from_ellipse_reaches_circle() {
    let n = 128;
    let ellipse: Vec<[f64; 2]> = (0..n)
        .map(|k| {
            let a = TAU * k as f64 / n as f64;
            [2.0_f64.sqrt() * a.cos(), -(0.5_f64).sqrt() * a.sin()]
        })
        .collect();
    let start = DiscreteHorizontalPath::new(ellipse, true);
    let area = start.signed_area();
    // Tangential drift of the nodes is nearly length-neutral; a looser stall
    // test ends the run once the shape has settled.
    let options = DirectSearchOptions { stall: 1e-8, ..Default::default() };
    let found = dido_direct_search_from(&IndicatrixProfile::Flat, start, &options).unwrap();
    let l = finsler_length(&IndicatrixProfile::Flat, &found).unwrap();
    assert!((found.signed_area() - area).abs() < 1e-9);
    assert!((l - 2.0 * (PI * area.abs()).sqrt()).abs() < 1e-3, "length {l}");
}
