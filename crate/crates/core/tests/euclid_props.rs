use blowup_core::euclid::*;
use blowup_core::ode::{cor24_bounds, cor24_thresholds};
use blowup_core::system::{FunctionalSeries, SystemParams};
use blowup_core::testfn::{build_test_function, TestFunctionData};
use num_complex::Complex64;

fn c(re: f64) -> Complex64 {
    Complex64::new(re, 0.0)
}

fn spec_1d(params: SystemParams, radius: f64, half_width: f64, h: f64, data: DataFamily) -> EuclidRunSpec {
    EuclidRunSpec {
        params,
        radius,
        box_half_width: half_width,
        h,
        data,
        scheme: Scheme::Imex,
        cfl: 0.01,
        dt_max: 1e-3,
        t_max: 1.0,
        threshold: 1e5,
        max_steps: 1_000_000,
    }
}

fn phi_data(epsilon: f64, radius: f64) -> DataFamily {
    DataFamily { epsilon, shape: Shape::Phi { radius }, a: c(1.0), b: c(1.0) }
}

#[test]
fn linear_limit_follows_heat_kernel() {
    let mut params = SystemParams::heat(1, 2.0, 2.0);
    params.beta1 = c(1e-14);
    params.beta2 = c(1e-14);
    let tf = build_test_function(1).unwrap();
    let width = 0.5;
    let t_end = 0.25;
    let max_err = |h: f64| {
        let data = DataFamily { epsilon: 1.0, shape: Shape::Gaussian { width }, a: c(1.0), b: c(1.0) };
        let spec = spec_1d(params, 1.0, 8.0, h, data);
        let solver = EuclidSolver::new(&spec, &tf).unwrap();
        let mut state = solver.initial_state();
        let steps = (t_end / h).round() as usize;
        for _ in 0..steps {
            state = solver.step(&state, t_end / steps as f64).unwrap();
        }
        (0..state.u.len())
            .map(|i| (state.u[i].re - gaussian_heat(&state.coords(i), width, 1.0, t_end, 1)).abs())
            .fold(0.0, f64::max)
    };
    let coarse = max_err(1.0 / 64.0);
    let fine = max_err(1.0 / 128.0);
    assert!(coarse < 1e-4, "coarse error {coarse}");
    let order = (coarse / fine).log2();
    assert!(order > 1.8 && order < 2.2, "observed order {order}");
}

#[test]
fn diffusive_rate_matches_weight_laplacian() {
    // data in B(R/2): the rate is sum u Laplace_h w, and Laplace_h w is smooth there
    let params = SystemParams::heat(1, 2.0, 2.0);
    let tf = build_test_function(1).unwrap();
    let err = |h: f64| {
        let spec = spec_1d(params, 1.0, 2.0, h, phi_data(1.0, 0.5));
        let solver = EuclidSolver::new(&spec, &tf).unwrap();
        let state = solver.initial_state();
        let exact: f64 = (0..state.u.len())
            .map(|i| state.u[i].re * tf.lap_phi_scaled(&state.coords(i), 1.0) * h)
            .sum();
        (solver.diffusive_rate(&state) - exact).abs() / exact.abs()
    };
    let (coarse, fine) = (err(1.0 / 64.0), err(1.0 / 128.0));
    assert!(coarse < 1e-3);
    let order = (coarse / fine).log2();
    assert!(order > 1.8, "observed order {order}");
}

#[test]
fn diffusive_rate_two_dimensions() {
    let params = SystemParams::heat(2, 3.0, 1.0);
    let tf = build_test_function(2).unwrap();
    let err = |h: f64| {
        let spec = spec_1d(params, 1.0, 2.0, h, phi_data(1.0, 0.5));
        let solver = EuclidSolver::new(&spec, &tf).unwrap();
        let state = solver.initial_state();
        let exact: f64 = (0..state.u.len())
            .map(|i| state.u[i].re * tf.lap_phi_scaled(&state.coords(i), 1.0) * h * h)
            .sum();
        (solver.diffusive_rate(&state) - exact).abs() / exact.abs()
    };
    let (coarse, fine) = (err(1.0 / 64.0), err(1.0 / 128.0));
    let order = (coarse / fine).log2();
    assert!(coarse < 1e-3 && order > 1.8, "errors {coarse} {fine}");
}

#[test]
fn odi_holds_at_start_for_weight_profile() {
    for (n, p, q) in [(1, 2.0, 1.5), (2, 3.0, 1.0)] {
        let params = SystemParams::heat(n, p, q);
        let tf = build_test_function(n).unwrap();
        let spec = spec_1d(params, 1.0, 2.0, 1.0 / 64.0, phi_data(1.0, 1.0));
        let solver = EuclidSolver::new(&spec, &tf).unwrap();
        let state = solver.initial_state();
        let (u, v, du, dv) = solver.functionals_with_rates(&state);
        // two-sided direct quadrature
        let cell = spec.h.powi(n as i32);
        let int_vp: f64 = (0..state.v.len()).map(|i| state.v[i].norm().powf(p) * tf.phi_scaled(&state.coords(i), 1.0) * cell).sum();
        let int_uq: f64 = (0..state.u.len()).map(|i| state.u[i].norm().powf(q) * tf.phi_scaled(&state.coords(i), 1.0) * cell).sum();
        let lhs_u = du + tf.lambda_eff() * u;
        let lhs_v = dv + tf.lambda_eff() * v;
        assert!(lhs_u >= int_vp, "{lhs_u} < {int_vp}");
        assert!(lhs_v >= int_uq);
        // Hoelder lower bound on the integrals
        assert!(int_vp >= tf.l1_norm.powf(1.0 - p) * v.powf(p) * (1.0 - 1e-9));
        let mut series = FunctionalSeries::default();
        series.push(0.0, u, v, du, dv);
        assert!(check_euclid_odi(&series, &params, &tf, 1.0).passed());
    }
}

#[test]
fn negative_window_is_not_checked() {
    let params = SystemParams::heat(1, 2.0, 1.5);
    let tf = build_test_function(1).unwrap();
    let mut series = FunctionalSeries::default();
    series.push(0.0, -1.0, 1.0, 0.0, 0.0);
    let report = check_euclid_odi(&series, &params, &tf, 1.0);
    assert_eq!((report.nodes_checked, report.nodes_not_checked), (0, 1));
}

fn thresholds(n: usize, p: f64, q: f64, u0: f64, v0: f64) -> ThresholdConstants {
    let tf = build_test_function(n).unwrap();
    evaluate_thresholds(&SystemParams::heat(n, p, q), &tf, u0, v0, 1.0).unwrap()
}

#[test]
fn r1_amplitude_scaling_and_monotonicity() {
    for (n, p, q) in [(1, 2.0, 1.5), (1, 2.0, 2.0), (2, 3.0, 1.0)] {
        let k = 2.0 * (p + 1.0) / (p * q - 1.0) - n as f64;
        let base = thresholds(n, p, q, 10.0, 1.0);
        let scaled = thresholds(n, p, q, 40.0, 1.0);
        assert!((scaled.r1 / base.r1 - 4f64.powf(-1.0 / k)).abs() < 1e-12);
        assert!((scaled.r1_display / base.r1_display - 4f64.powf(-1.0 / k)).abs() < 1e-12);
        let mut prev = f64::INFINITY;
        for i in 0..20 {
            let r1 = thresholds(n, p, q, 0.5 * 1.7f64.powi(i), 1.0).r1;
            assert!(r1 < prev);
            prev = r1;
        }
    }
}

#[test]
fn c1_loses_norm_dependence_when_exponents_match() {
    let mut params = SystemParams::heat(1, 2.0, 2.0);
    params.beta1 = c(1.3);
    params.beta2 = Complex64::new(0.0, 0.6);
    let tf = build_test_function(1).unwrap();
    let mut heavier = tf.clone();
    heavier.l1_norm *= 3.0;
    let a = evaluate_thresholds(&params, &tf, 5.0, 5.0, 1.0).unwrap();
    let b = evaluate_thresholds(&params, &heavier, 5.0, 5.0, 1.0).unwrap();
    let expected = (1.3f64.powf(4.0) / 0.6f64.powf(4.0)).powf(3.0 / 9.0);
    assert!((a.c1 - expected).abs() < 1e-12 * expected);
    assert!((b.c1 - expected).abs() < 1e-12 * expected);
    assert!(a.p_equals_q && a.r2 == 0.0);

    params.p = 3.0;
    let a = evaluate_thresholds(&params, &tf, 5.0, 5.0, 1.0).unwrap();
    let b = evaluate_thresholds(&params, &heavier, 5.0, 5.0, 1.0).unwrap();
    assert!((a.c1 / b.c1 - 1.0).abs() > 1e-3);
}

#[test]
fn t1_amplitude_scaling() {
    // with p = q, or r1 dominating r2, the minimisation window is [1, inf) at every amplitude
    for (n, p, q, v0) in [(1, 2.0f64, 2.0f64, 1.0), (1, 2.0, 1.5, 0.1), (2, 3.0, 1.0, 0.1)] {
        let exponent = -1.0 / ((p + 1.0) / (p * q - 1.0) - n as f64 / 2.0);
        let base = thresholds(n, p, q, 10.0, v0);
        let eps = 3.7;
        let scaled = thresholds(n, p, q, 10.0 * eps, v0);
        assert!(base.r1 >= base.r2 && scaled.r1 >= scaled.r2);
        let ratio = scaled.t1.unwrap() / base.t1.unwrap();
        assert!((ratio / eps.powf(exponent) - 1.0).abs() < 1e-9, "{ratio} vs {}", eps.powf(exponent));
    }
}

fn golden_min(f: impl Fn(f64) -> f64, mut a: f64, mut b: f64) -> f64 {
    let r = (5f64.sqrt() - 1.0) / 2.0;
    while b - a > 1e-12 * (1.0 + b.abs()) {
        let (c, d) = (b - r * (b - a), a + r * (b - a));
        if f(c) < f(d) {
            b = d;
        } else {
            a = c;
        }
    }
    f(0.5 * (a + b))
}

#[test]
fn t1_is_best_damped_lifespan_over_radii() {
    for (n, p, q, u0, v0) in [(1, 2.0, 1.5, 50.0, 10.0), (1, 2.0, 2.0, 20.0, 10.0), (2, 3.0, 1.0, 100.0, 10.0)] {
        let params = SystemParams::heat(n, p, q);
        let tf = build_test_function(n).unwrap();
        let th = evaluate_thresholds(&params, &tf, u0, v0, 1.0).unwrap();
        let lifespan = |log_r: f64| {
            let spec = weighted_ode_spec(&params, &tf, log_r.exp(), tf.lambda_eff(), u0, v0);
            cor24_bounds(&spec).unwrap().lifespan_bound.unwrap_or(f64::INFINITY)
        };
        // the lifespan is unimodal in log R on (R0, inf)
        let lo = (th.r0 * (1.0 + 1e-9)).ln();
        let best = golden_min(lifespan, lo, lo + 5.0);
        let t1 = th.t1.unwrap();
        assert!((t1 / best - 1.0).abs() < 1e-8, "T1 {t1} vs min {best}");
    }
}

#[test]
fn radii_match_primitive_conditions() {
    for (n, p, q, u0, v0) in [(1, 2.0, 1.5, 3.0, 8.0), (2, 3.0, 1.0, 10.0, 30.0), (1, 2.0, 2.0, 3.0, 2.0)] {
        let params = SystemParams::heat(n, p, q);
        let tf = build_test_function(n).unwrap();
        let th = evaluate_thresholds(&params, &tf, u0, v0, 1.0).unwrap();
        let at = |r: f64| cor24_thresholds(&weighted_ode_spec(&params, &tf, r, tf.lambda_eff(), u0, v0));
        // damping part switches at r1
        assert!(at(th.r1 * (1.0 + 1e-9))[0] < u0 && at(th.r1 * (1.0 - 1e-9))[0] > u0);
        // the closed-form display lacks the norm factor
        let k = 2.0 * (p + 1.0) / (p * q - 1.0) - n as f64;
        assert!((th.r1 / th.r1_display / tf.l1_norm.powf(1.0 / k) - 1.0).abs() < 1e-12);
        if p > q {
            assert!(at(th.r2 * (1.0 + 1e-9))[1] < u0 && at(th.r2 * (1.0 - 1e-9))[1] > u0);
        } else {
            // ordering condition independent of R
            assert_eq!(at(0.5)[1] < u0, at(50.0)[1] < u0);
        }
    }
}

fn bracket_from_curve(bounds: &Prop41Bounds, t: f64) -> f64 {
    let s = &bounds.spec;
    let curve = bounds.report.lower_bound.unwrap();
    let g = curve.eval(t) * (s.omega * t / (s.p + 1.0)).exp();
    (g + curve.shift()).powf(-(s.p * s.q - 1.0) / (s.q + 1.0))
}

#[test]
fn displayed_constants_reproduce_lower_bound() {
    for (n, p, q, u0, v0, radius) in [(1, 2.0, 1.5, 40.0, 5.0, 2.0), (2, 3.0, 1.0, 400.0, 20.0, 6.0), (1, 2.0, 2.0, 30.0, 10.0, 1.5)] {
        let params = SystemParams::heat(n, p, q);
        let tf = build_test_function(n).unwrap();
        let bounds = prop41_bounds(&params, &tf, u0, v0, radius).unwrap();
        assert!(bounds.report.hypothesis_satisfied, "n={n} p={p}");
        let th = &bounds.thresholds;
        let nf = n as f64;
        let d = p * q - 1.0;
        let pq1 = (p + 1.0) * (q + 1.0);
        let kappa = bounds.spec.omega * d / pq1;
        let lifespan = bounds.report.lifespan_bound.unwrap();
        for frac in [0.0, 0.3, 0.7, 0.95] {
            let t = frac * lifespan;
            let display = th.c1 * radius.powf(-nf * d * (p - q) / pq1) * u0.powf(-d / (p + 1.0))
                - th.c2 / th.lambda_tilde * radius.powf(2.0 - nf * d / (q + 1.0)) * -(-kappa * t).exp_m1();
            let bracket = bracket_from_curve(&bounds, t);
            assert!((display - bracket).abs() < 1e-10 * bracket.abs().max(th.c1 * u0.powf(-d / (p + 1.0))), "t={t}: {display} vs {bracket}");
        }
    }
}

#[test]
fn bounds_pass_through_damped_ode() {
    let params = SystemParams::heat(1, 2.0, 1.5);
    let tf = build_test_function(1).unwrap();
    let bounds = prop41_bounds(&params, &tf, 40.0, 5.0, 2.0).unwrap();
    let direct = cor24_bounds(&weighted_ode_spec(&params, &tf, 2.0, tf.lambda_eff(), 40.0, 5.0)).unwrap();
    assert_eq!(bounds.report, direct);
    assert!(bounds.thresholds.above_r0);
    // below R0 the hypothesis is refused
    let below = prop41_bounds(&params, &tf, 40.0, 5.0, bounds.thresholds.r0 * 0.5).unwrap();
    assert!(!below.report.hypothesis_satisfied);
    // lambda_psi variant halves the eigenvalue
    assert!((bounds.thresholds_lambda_psi.lambda * 2.0 - bounds.thresholds.lambda).abs() < 1e-15);
}

fn blowup_spec(scheme: Scheme, h: f64) -> (EuclidRunSpec, TestFunctionData) {
    let params = SystemParams::heat(1, 2.0, 1.5);
    let tf = build_test_function(1).unwrap();
    let data = DataFamily { epsilon: 100.0, shape: Shape::Phi { radius: 2.0 }, a: c(1.0), b: c(0.3) };
    let mut spec = spec_1d(params, 1.0, 4.0, h, data);
    spec.scheme = scheme;
    spec.dt_max = 1e-4;
    spec.t_max = 0.05;
    (spec, tf)
}

#[test]
fn explicit_and_imex_agree() {
    let (imex, tf) = blowup_spec(Scheme::Imex, 1.0 / 64.0);
    let (explicit, _) = blowup_spec(Scheme::Explicit, 1.0 / 64.0);
    let a = run_euclid(&imex, &tf).unwrap();
    let b = run_euclid(&explicit, &tf).unwrap();
    let (ua, ub) = (a.series.u.last().unwrap(), b.series.u.last().unwrap());
    assert!((ua / ub - 1.0).abs() < 1e-5, "{ua} vs {ub}");
    assert!((a.final_state.t - b.final_state.t).abs() < 1e-12);
}

#[test]
fn accepted_run_respects_odi_and_bound() {
    let (mut spec, tf) = blowup_spec(Scheme::Imex, 1.0 / 128.0);
    spec.t_max = 10.0;
    spec.dt_max = 1e-3;
    let run = run_euclid(&spec, &tf).unwrap();
    let report = EuclidReport::new(&run, &spec, &tf).unwrap();
    assert!(report.data_positive);
    assert!(report.bounds.report.hypothesis_satisfied);
    assert_eq!(run.status, blowup_core::torus::RunStatus::ThresholdReached);
    assert!(report.odi.passed(), "{:?}", report.odi.violations.first());
    assert!(report.escape_time.unwrap() <= report.bounds.report.lifespan_bound.unwrap());
}
