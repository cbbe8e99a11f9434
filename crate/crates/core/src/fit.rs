//! Blow-up time and rate extraction from a diverging series `y ~ A (T* - t)^-gamma`.

use serde::Serialize;

use crate::error::{invalid, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RateFit {
    pub t_star: f64,
    pub gamma: f64,
    pub amplitude: f64,
    /// Root-mean-square misfit in log space.
    pub residual: f64,
    pub window: [f64; 2],
}

pub const MIN_NODES: usize = 20;

/// Fit on the nodes with `t` in `window` (inclusive).
pub fn fit_power_law(times: &[f64], values: &[f64], window: [f64; 2]) -> Result<RateFit> {
    if times.len() != values.len() {
        return Err(invalid("times and values differ in length"));
    }
    let (ts, ys): (Vec<f64>, Vec<f64>) = times
        .iter()
        .zip(values)
        .filter(|(t, _)| **t >= window[0] && **t <= window[1])
        .map(|(t, y)| (*t, *y))
        .unzip();
    if ts.len() < MIN_NODES {
        return Err(invalid(format!("window holds {} nodes, need at least {MIN_NODES}", ts.len())));
    }
    if ys.iter().any(|y| !(*y > 0.0 && y.is_finite())) {
        return Err(invalid("series must be positive and finite on the window"));
    }
    if ts.windows(2).any(|w| w[1] <= w[0]) || ys.windows(2).any(|w| w[1] <= w[0]) {
        return Err(invalid("series must be strictly increasing on the window"));
    }
    let logs: Vec<f64> = ys.iter().map(|y| y.ln()).collect();
    let (t_lo, t_hi) = (ts[0], ts[ts.len() - 1]);
    let span = t_hi - t_lo;

    // Search over the offset d = T* - t_hi in log scale.
    let objective = |log_d: f64| {
        let sse = regress(&ts, &logs, t_hi + log_d.exp()).2;
        if sse.is_finite() {
            sse
        } else {
            f64::INFINITY
        }
    };
    // keep T* resolvable from t_hi in floating point
    let floor = (span * 1e-13).max(64.0 * f64::EPSILON * t_hi.abs());
    let (lo, hi) = (floor.ln(), (10.0 * span).ln());
    let scan = 240;
    let grid: Vec<f64> = (0..=scan).map(|i| lo + (hi - lo) * i as f64 / scan as f64).collect();
    let best = (0..=scan)
        .min_by(|&a, &b| objective(grid[a]).total_cmp(&objective(grid[b])))
        .unwrap_or(0);
    let (mut a, mut b) = (grid[best.saturating_sub(1)], grid[(best + 1).min(scan)]);
    let inv_phi = (5f64.sqrt() - 1.0) / 2.0;
    let mut c = b - inv_phi * (b - a);
    let mut d = a + inv_phi * (b - a);
    let (mut fc, mut fd) = (objective(c), objective(d));
    while b - a > 1e-13 {
        if fc < fd {
            b = d;
            d = c;
            fd = fc;
            c = b - inv_phi * (b - a);
            fc = objective(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + inv_phi * (b - a);
            fd = objective(d);
        }
    }
    let t_star = t_hi + (0.5 * (a + b)).exp();
    let (log_amp, gamma, sse) = regress(&ts, &logs, t_star);
    if !(gamma > 0.0) {
        return Err(invalid("series shows no power-law growth on the window"));
    }
    Ok(RateFit {
        t_star,
        gamma,
        amplitude: log_amp.exp(),
        residual: (sse / ts.len() as f64).sqrt(),
        window: [t_lo, t_hi],
    })
}

/// Window covering the trailing decade of growth below `threshold`, that is
/// the nodes with `threshold / 10 <= y <= threshold`.
pub fn trailing_decade(times: &[f64], values: &[f64], threshold: f64) -> Option<[f64; 2]> {
    let start = values.iter().position(|y| *y >= threshold / 10.0)?;
    let end = values.iter().rposition(|y| *y <= threshold)?;
    (end > start).then(|| [times[start], times[end]])
}

/// Least squares for `log y = log A - gamma log(T* - t)`; returns `(log A, gamma, sse)`.
fn regress(ts: &[f64], logs: &[f64], t_star: f64) -> (f64, f64, f64) {
    let n = ts.len() as f64;
    let xs: Vec<f64> = ts.iter().map(|t| (t_star - t).ln()).collect();
    let mx = xs.iter().sum::<f64>() / n;
    let my = logs.iter().sum::<f64>() / n;
    let (mut sxx, mut sxy) = (0.0, 0.0);
    for (x, y) in xs.iter().zip(logs) {
        sxx += (x - mx) * (x - mx);
        sxy += (x - mx) * (y - my);
    }
    let slope = sxy / sxx;
    let icpt = my - slope * mx;
    let sse = xs.iter().zip(logs).map(|(x, y)| (y - icpt - slope * x).powi(2)).sum();
    (icpt, -slope, sse)
}
