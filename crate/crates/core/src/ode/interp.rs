use crate::error::{invalid, Result};

/// Piecewise cubic Hermite interpolant with Fritsch-Carlson slopes; preserves
/// monotonicity of the data.
#[derive(Debug, Clone)]
pub struct MonotoneCubic {
    xs: Vec<f64>,
    ys: Vec<f64>,
    slopes: Vec<f64>,
}

impl MonotoneCubic {
    pub fn new(xs: &[f64], ys: &[f64]) -> Result<Self> {
        if xs.len() != ys.len() || xs.is_empty() {
            return Err(invalid("interpolation needs matching, non-empty abscissae and ordinates"));
        }
        if xs.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(invalid("interpolation abscissae must be strictly increasing"));
        }
        let n = xs.len();
        let mut slopes = vec![0.0; n];
        if n >= 2 {
            let h: Vec<f64> = xs.windows(2).map(|w| w[1] - w[0]).collect();
            let delta: Vec<f64> = (0..n - 1).map(|i| (ys[i + 1] - ys[i]) / h[i]).collect();
            for i in 1..n - 1 {
                if delta[i - 1] * delta[i] > 0.0 {
                    // weighted harmonic mean
                    let w1 = 2.0 * h[i] + h[i - 1];
                    let w2 = h[i] + 2.0 * h[i - 1];
                    slopes[i] = (w1 + w2) / (w1 / delta[i - 1] + w2 / delta[i]);
                }
            }
            slopes[0] = end_slope(h[0], h.get(1).copied(), delta[0], delta.get(1).copied());
            slopes[n - 1] = end_slope(
                h[n - 2],
                n.checked_sub(3).map(|i| h[i]),
                delta[n - 2],
                n.checked_sub(3).map(|i| delta[i]),
            );
        }
        Ok(Self { xs: xs.to_vec(), ys: ys.to_vec(), slopes })
    }

    pub fn domain(&self) -> (f64, f64) {
        (self.xs[0], self.xs[self.xs.len() - 1])
    }

    /// Value at `x`, clamped to the end values outside the data range.
    pub fn eval(&self, x: f64) -> f64 {
        let n = self.xs.len();
        if n == 1 || x <= self.xs[0] {
            return self.ys[0];
        }
        if x >= self.xs[n - 1] {
            return self.ys[n - 1];
        }
        let i = self.xs.partition_point(|&xi| xi <= x) - 1;
        if self.xs[i] == x {
            return self.ys[i];
        }
        let h = self.xs[i + 1] - self.xs[i];
        let s = (x - self.xs[i]) / h;
        let h00 = (1.0 + 2.0 * s) * (1.0 - s) * (1.0 - s);
        let h10 = s * (1.0 - s) * (1.0 - s);
        let h01 = s * s * (3.0 - 2.0 * s);
        let h11 = s * s * (s - 1.0);
        h00 * self.ys[i] + h10 * h * self.slopes[i] + h01 * self.ys[i + 1] + h11 * h * self.slopes[i + 1]
    }
}

// Three-point end slope, limited to keep the end interval monotone.
fn end_slope(h0: f64, h1: Option<f64>, d0: f64, d1: Option<f64>) -> f64 {
    let (Some(h1), Some(d1)) = (h1, d1) else { return d0 };
    let m = ((2.0 * h0 + h1) * d0 - h0 * d1) / (h0 + h1);
    if m.signum() != d0.signum() {
        0.0
    } else if d0.signum() != d1.signum() && m.abs() > 3.0 * d0.abs() {
        3.0 * d0
    } else {
        m
    }
}
