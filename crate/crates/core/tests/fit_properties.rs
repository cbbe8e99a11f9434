use blowup_core::fit::fit_power_law;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn grid(n: usize, lo: f64, hi: f64) -> Vec<f64> {
    (0..n).map(|i| lo + (hi - lo) * i as f64 / (n - 1) as f64).collect()
}

#[test]
fn noisy_power_law_recovers_exponent() {
    let ts = grid(200, 0.0, 0.9);
    let clean: Vec<f64> = ts.iter().map(|t| (1.0 - t).powf(-1.5)).collect();
    let reference = fit_power_law(&ts, &clean, [0.0, 0.9]).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let mut worst = 0.0f64;
    for _ in 0..100 {
        let noisy: Vec<f64> = clean.iter().map(|y| y * (1.0 + rng.gen_range(-1e-3..1e-3))).collect();
        // the noise can break monotonicity only where consecutive values differ by < 0.2%
        if noisy.windows(2).any(|w| w[1] <= w[0]) {
            continue;
        }
        let fit = fit_power_law(&ts, &noisy, [0.0, 0.9]).unwrap();
        worst = worst.max((fit.gamma / reference.gamma - 1.0).abs());
    }
    assert!(worst < 0.01, "worst relative deviation {worst}");
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn exact_laws_are_recovered(gamma in 0.3f64..3.0, t_star in 0.5f64..5.0, amp in 0.1f64..10.0) {
        let ts = grid(120, 0.0, 0.9 * t_star);
        let ys: Vec<f64> = ts.iter().map(|t| amp * (t_star - t).powf(-gamma)).collect();
        let fit = fit_power_law(&ts, &ys, [0.0, t_star]).unwrap();
        prop_assert!((fit.gamma - gamma).abs() < 1e-6);
        prop_assert!((fit.t_star - t_star).abs() < 1e-6 * t_star);
        prop_assert!(fit.residual < 1e-10);
        prop_assert!(fit.t_star > fit.window[1]);
    }

    #[test]
    fn time_rescaling(gamma in 0.5f64..2.5, c in 0.1f64..20.0) {
        let ts = grid(150, 0.0, 0.95);
        let ys: Vec<f64> = ts.iter().map(|t| (1.0 - t).powf(-gamma) + 0.3).collect();
        let scaled: Vec<f64> = ts.iter().map(|t| c * t).collect();
        let a = fit_power_law(&ts, &ys, [0.0, 1.0]).unwrap();
        let b = fit_power_law(&scaled, &ys, [0.0, c]).unwrap();
        prop_assert!((b.t_star / (c * a.t_star) - 1.0).abs() < 1e-6);
        prop_assert!((b.gamma / a.gamma - 1.0).abs() < 1e-6);
    }

    #[test]
    fn window_shift_stability(gamma in 0.5f64..2.5, frac in 0.0f64..0.01) {
        // additive constant at most 1% of the window minimum
        let ts = grid(400, 0.5, 0.999);
        let y_min = 0.5f64.powf(-gamma);
        let ys: Vec<f64> = ts.iter().map(|t| (1.0 - t).powf(-gamma) + frac * y_min).collect();
        let base = fit_power_law(&ts, &ys, [0.5, 0.999]).unwrap();
        let shifted = fit_power_law(&ts, &ys, [0.5 + 0.1 * 0.499, 0.999]).unwrap();
        prop_assert!((shifted.gamma / base.gamma - 1.0).abs() < 0.02);
    }
}
