use serde::Serialize;

/// Two-sided 97.5% Student-t quantiles for 1..=30 degrees of freedom.
const T975: [f64; 30] = [
    12.706, 4.303, 3.182, 2.776, 2.571, 2.447, 2.365, 2.306, 2.262, 2.228, 2.201, 2.179, 2.160, 2.145, 2.131,
    2.120, 2.110, 2.101, 2.093, 2.086, 2.080, 2.074, 2.069, 2.064, 2.060, 2.056, 2.052, 2.048, 2.045, 2.042,
];

pub fn t_quantile_975(dof: usize) -> f64 {
    match dof {
        0 => f64::INFINITY,
        1..=30 => T975[dof - 1],
        _ => 1.96,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct LineFit {
    pub slope: f64,
    pub intercept: f64,
    pub slope_std_error: f64,
    /// 95% confidence interval for the slope.
    pub ci95: [f64; 2],
    pub points: usize,
}

/// Ordinary least squares `y = intercept + slope x`; `None` for fewer than 3 points
/// or a degenerate `x`.
pub fn ols(xs: &[f64], ys: &[f64]) -> Option<LineFit> {
    let m = xs.len();
    if m < 3 || ys.len() != m {
        return None;
    }
    let mf = m as f64;
    let mx = xs.iter().sum::<f64>() / mf;
    let my = ys.iter().sum::<f64>() / mf;
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    if !(sxx > 0.0) {
        return None;
    }
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let sse: f64 = xs.iter().zip(ys).map(|(x, y)| (y - intercept - slope * x).powi(2)).sum();
    let se = (sse / (mf - 2.0) / sxx).sqrt();
    let half = t_quantile_975(m - 2) * se;
    Some(LineFit { slope, intercept, slope_std_error: se, ci95: [slope - half, slope + half], points: m })
}
