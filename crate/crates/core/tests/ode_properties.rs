use blowup_core::ode::*;
use proptest::prelude::*;

fn spec_strategy(damped: bool) -> impl Strategy<Value = CoupledOdeSpec> {
    let omega = if damped { (0.1f64..2.0).boxed() } else { Just(0.0).boxed() };
    (1.0f64..4.0, 1.0f64..4.0, 0.2f64..2.0, 0.2f64..2.0, omega, 0.5f64..2.0, 0.5f64..2.0)
        .prop_filter("pq > 1", |(p, q, ..)| p * q > 1.05)
        .prop_map(|(p, q, c_p, c_q, omega, f0, g0)| CoupledOdeSpec { p, q, c_p, c_q, omega, f0, g0 })
}

fn blowup(spec: &CoupledOdeSpec) -> Trajectory {
    integrate_coupled(spec, 1e4, 1e-11, 1e6).expect("integration")
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn undamped_trajectories_are_monotone(spec in spec_strategy(false)) {
        let traj = blowup(&spec);
        for w in traj.values().windows(2) {
            prop_assert!(w[1][0] >= w[0][0] && w[1][1] >= w[0][1]);
        }
    }

    #[test]
    fn ordered_data_stays_ordered(spec in spec_strategy(false), shrink in 0.5f64..0.99) {
        let sup = blowup(&spec);
        let sub = blowup(&spec.with_initial(spec.f0 * shrink, spec.g0 * shrink));
        prop_assert!(check_comparison(&sub, &sup).unwrap().passed());
    }

    #[test]
    fn damped_ordered_data_stays_ordered(spec in spec_strategy(true), shrink in 0.5f64..0.99) {
        let f0 = cor24_thresholds(&spec)[0].max(spec.f0) * 2.0;
        let spec = spec.with_initial(f0, spec.g0);
        let sup = blowup(&spec);
        let sub = integrate_coupled(&spec.with_initial(f0 * shrink, spec.g0 * shrink), sup.final_time(), 1e-11, 1e12).unwrap();
        prop_assert!(check_comparison(&sub, &sup).unwrap().passed());
    }

    #[test]
    fn undamped_lower_bound_dominated(spec in spec_strategy(false)) {
        // put the data on the hypothesis side of the ordering
        let g0 = (spec.c_q / spec.c_p * spec.f0.powf(spec.q + 1.0)).powf(1.0 / (spec.p + 1.0)) * 0.9;
        let spec = spec.with_initial(spec.f0, g0);
        let report = prop23_bounds(&spec).unwrap();
        prop_assert!(report.hypothesis_satisfied);
        let traj = blowup(&spec);
        let curve = report.lower_bound.unwrap();
        for (t, [_, g]) in traj.times().iter().zip(traj.values()) {
            prop_assert!(*g >= curve.eval(*t) - 1e-9 * (1.0 + g));
        }
        let escape = tail_corrected_lifespan(&traj, &spec).unwrap();
        prop_assert!(escape <= report.lifespan_bound.unwrap());
    }

    #[test]
    fn damped_lower_bound_dominated(spec in spec_strategy(true), lift in 1.01f64..3.0) {
        let spec = spec.with_initial(1.0, spec.g0);
        let [a, b] = cor24_thresholds(&spec);
        let spec = spec.with_initial(a.max(b) * lift, spec.g0);
        let report = cor24_bounds(&spec).unwrap();
        prop_assert!(report.hypothesis_satisfied);
        let traj = blowup(&spec);
        let curve = report.lower_bound.unwrap();
        for (t, [_, g]) in traj.times().iter().zip(traj.values()) {
            prop_assert!(*g >= curve.eval(*t) - 1e-9 * (1.0 + g));
        }
        let escape = tail_corrected_lifespan(&traj, &spec).unwrap();
        prop_assert!(escape <= report.lifespan_bound.unwrap());
    }

    #[test]
    fn identity_holds_relative_to_term_size(spec in spec_strategy(false)) {
        let traj = blowup(&spec);
        prop_assert!(conserved_residual_relative(&traj, &spec) < 1e-7);
    }

    #[test]
    fn damped_identity_holds_relative_to_term_size(spec in spec_strategy(true)) {
        let f0 = cor24_thresholds(&spec)[0].max(spec.f0) * 2.0;
        let spec = spec.with_initial(f0, spec.g0);
        let traj = blowup(&spec);
        prop_assert!(conserved_residual_relative(&traj, &spec) < 1e-7);
    }

    #[test]
    fn normalised_identity_with_unit_weights(p in 1.0f64..4.0, q in 1.0f64..4.0, f0 in 0.5f64..2.0, g0 in 0.5f64..2.0) {
        prop_assume!(p * q > 1.05);
        // f^(q+1)/(q+1) - g^(p+1)/(p+1) is conserved
        let spec = CoupledOdeSpec { p, q, c_p: 1.0 / (p + 1.0), c_q: 1.0 / (q + 1.0), omega: 0.0, f0, g0 };
        let traj = integrate_coupled(&spec, 1e4, 1e-12, 10.0).unwrap();
        let inv = |f: f64, g: f64| f.powf(q + 1.0) / (q + 1.0) - g.powf(p + 1.0) / (p + 1.0);
        let i0 = inv(f0, g0);
        for [f, g] in traj.values() {
            prop_assert!((inv(*f, *g) - i0).abs() < 1e-7);
        }
    }
}

#[test]
fn damped_lifespan_tends_to_undamped() {
    // g0 just below f0 so the strict damped ordering holds
    let base = CoupledOdeSpec { p: 2.0, q: 2.0, c_p: 1.0, c_q: 1.0, omega: 0.0, f0: 1.0, g0: 0.999 };
    let undamped = prop23_bounds(&base).unwrap().lifespan_bound.unwrap();
    let damped = cor24_bounds(&CoupledOdeSpec { omega: 1e-6, ..base }).unwrap().lifespan_bound.unwrap();
    assert!((damped / undamped - 1.0).abs() <= 1e-3);
}

#[test]
fn symmetric_case_matches_single_equation() {
    // f = g solves f' = 3 f^2 when C = 1, p = q = 2
    let spec = CoupledOdeSpec { p: 2.0, q: 2.0, c_p: 1.0, c_q: 1.0, omega: 0.0, f0: 1.0, g0: 1.0 };
    let traj = integrate_coupled(&spec, 1.0, 1e-12, 1e6).unwrap();
    let single = SingleOdeSpec::new(2.0, 3.0, 1.0).unwrap();
    for (t, [f, _]) in traj.times().iter().zip(traj.values()).filter(|(_, v)| v[0] < 1e4) {
        let exact = single.solution(*t).unwrap();
        assert!((f / exact - 1.0).abs() < 1e-8);
    }
}
