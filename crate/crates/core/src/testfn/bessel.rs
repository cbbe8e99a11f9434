//! `J0`, `J1` by their power series; accurate to rounding on the short range
//! (`|x| <= 4`) the eigenfunction of the unit disk needs.

fn series(x: f64, order: i32) -> f64 {
    let y = -(x * x) / 4.0;
    let mut term = (x / 2.0).powi(order);
    for k in 1..=order {
        term /= k as f64;
    }
    let mut sum = term;
    for k in 1..60 {
        term *= y / (k as f64 * (k + order) as f64);
        sum += term;
        if term.abs() < 1e-18 * sum.abs() {
            break;
        }
    }
    sum
}

pub fn j0(x: f64) -> f64 {
    debug_assert!(x.abs() <= 8.0);
    series(x, 0)
}

pub fn j1(x: f64) -> f64 {
    debug_assert!(x.abs() <= 8.0);
    series(x, 1)
}

/// `J1(x)/x`, finite at the origin.
pub fn j1_over_x(x: f64) -> f64 {
    let y = -(x * x) / 4.0;
    let mut term = 0.5;
    let mut sum = term;
    for k in 1..60 {
        term *= y / (k as f64 * (k + 1) as f64);
        sum += term;
        if term.abs() < 1e-18 * sum.abs() {
            break;
        }
    }
    sum
}

/// First positive zero of `J0`, bracketed in `[2, 3]` and refined by
/// safeguarded Newton steps.
pub fn j0_first_zero() -> f64 {
    let (mut lo, mut hi) = (2.0_f64, 3.0_f64);
    debug_assert!(j0(lo) > 0.0 && j0(hi) < 0.0);
    let mut x = 0.5 * (lo + hi);
    for _ in 0..200 {
        let fx = j0(x);
        if fx > 0.0 {
            lo = x;
        } else {
            hi = x;
        }
        // J0' = -J1
        let newton = x + fx / j1(x);
        let next = if newton > lo && newton < hi { newton } else { 0.5 * (lo + hi) };
        if (next - x).abs() <= 1e-15 * x {
            return next;
        }
        x = next;
    }
    x
}

#[cfg(test)]
mod tests {
    use super::*;

    // Reference values from Abramowitz & Stegun tables.
    #[test]
    fn tabulated_values() {
        assert!((j0(1.0) - 0.765_197_686_557_966_6).abs() < 1e-15);
        assert!((j1(1.0) - 0.440_050_585_744_933_5).abs() < 1e-15);
        assert!((j0(2.5) - -0.048_383_776_468_197_8).abs() < 1e-15);
        assert!((j1_over_x(1e-9) - 0.5).abs() < 1e-15);
    }

    #[test]
    fn first_zero() {
        let z = j0_first_zero();
        assert!((z - 2.404_825_557_695_773).abs() < 1e-12);
        assert!(j0(z).abs() < 1e-15);
    }
}
