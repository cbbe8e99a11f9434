//! Types shared by the torus and Euclidean simulators.

use std::io::Write;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};
use crate::io::write_csv_rows;

/// Coefficients of `u_t + a1 Laplace u = b1 |v|^p`, `v_t + a2 Laplace v = b2 |u|^q` in dimension `n`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SystemParams {
    pub n: usize,
    pub p: f64,
    pub q: f64,
    pub alpha1: Complex64,
    pub alpha2: Complex64,
    pub beta1: Complex64,
    pub beta2: Complex64,
}

impl SystemParams {
    /// Heat-type coefficients `a1 = a2 = -1`, `b1 = b2 = 1`.
    pub fn heat(n: usize, p: f64, q: f64) -> Self {
        let one = Complex64::new(1.0, 0.0);
        Self { n, p, q, alpha1: -one, alpha2: -one, beta1: one, beta2: one }
    }

    pub fn validate(&self) -> Result<()> {
        if !(1..=3).contains(&self.n) {
            return Err(invalid(format!("dimension must be 1, 2 or 3, got {}", self.n)));
        }
        if !(self.p.is_finite() && self.q.is_finite() && self.p > 0.0 && self.q > 0.0) {
            return Err(invalid("p and q must be positive"));
        }
        if self.p * self.q <= 1.0 {
            return Err(invalid(format!("pq must exceed 1, got {}", self.p * self.q)));
        }
        if self.p < self.q {
            return Err(invalid("p >= q is required"));
        }
        if self.beta1.norm() == 0.0 || self.beta2.norm() == 0.0 {
            return Err(invalid("beta1 and beta2 must be nonzero"));
        }
        if self.alpha1.norm() == 0.0 || self.alpha2.norm() == 0.0 {
            return Err(invalid("alpha1 and alpha2 must be nonzero"));
        }
        Ok(())
    }

    /// Simulation additionally needs `Re a_i <= 0`, otherwise high modes grow without bound.
    pub fn validate_for_simulation(&self) -> Result<()> {
        self.validate()?;
        if self.alpha1.re > 0.0 || self.alpha2.re > 0.0 {
            return Err(invalid("simulation requires Re(alpha) <= 0"));
        }
        Ok(())
    }

    /// `((p+1)/(pq-1), (q+1)/(pq-1))`.
    pub fn rate_exponents(&self) -> (f64, f64) {
        let d = self.p * self.q - 1.0;
        ((self.p + 1.0) / d, (self.q + 1.0) / d)
    }

    /// True when `q < 1`, outside the regime where the Hoelder step holds.
    pub fn outside_verified_regime(&self) -> bool {
        self.q < 1.0
    }
}

/// Time series of the functionals `U`, `V` and their time derivatives.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct FunctionalSeries {
    pub times: Vec<f64>,
    pub u: Vec<f64>,
    pub v: Vec<f64>,
    pub du: Vec<f64>,
    pub dv: Vec<f64>,
}

impl FunctionalSeries {
    pub fn push(&mut self, t: f64, u: f64, v: f64, du: f64, dv: f64) {
        debug_assert!(self.times.last().is_none_or(|last| t > *last));
        self.times.push(t);
        self.u.push(u);
        self.v.push(v);
        self.du.push(du);
        self.dv.push(dv);
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    /// CSV `t,U,V,dUdt,dVdt`.
    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let rows = (0..self.len()).map(|i| vec![self.times[i], self.u[i], self.v[i], self.du[i], self.dv[i]]);
        write_csv_rows(w, &["t", "U", "V", "dUdt", "dVdt"], rows)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Channel {
    U,
    V,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct OdiViolation {
    pub index: usize,
    pub t: f64,
    pub channel: Channel,
    /// `dU/dt + damping * U` (or the `V` analogue).
    pub lhs: f64,
    pub rhs: f64,
}

/// Outcome of checking a pair of ordinary differential inequalities along a series.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OdiReport {
    pub nodes_checked: usize,
    /// Nodes skipped because `U < 0` or `V < 0`.
    pub nodes_not_checked: usize,
    pub first_not_checked: Option<f64>,
    pub violations: Vec<OdiViolation>,
    /// Smallest `(lhs - rhs) / (1 + |lhs|)` seen over checked nodes.
    pub min_relative_slack: f64,
    pub outside_verified_regime: bool,
}

impl OdiReport {
    pub fn passed(&self) -> bool {
        self.violations.is_empty()
    }
}

/// `U' + damp_u U >= coef_u V^exp_u` and `V' + damp_v V >= coef_v U^exp_v`,
/// each up to `rel_tol (1 + |U'|)`.
#[derive(Debug, Clone, Copy)]
pub(crate) struct OdiForm {
    pub damp_u: f64,
    pub damp_v: f64,
    pub coef_u: f64,
    pub exp_u: f64,
    pub coef_v: f64,
    pub exp_v: f64,
    pub rel_tol: f64,
    pub outside_verified_regime: bool,
}

pub(crate) fn check_odi(series: &FunctionalSeries, form: OdiForm) -> OdiReport {
    let mut report = OdiReport {
        nodes_checked: 0,
        nodes_not_checked: 0,
        first_not_checked: None,
        violations: Vec::new(),
        min_relative_slack: f64::INFINITY,
        outside_verified_regime: form.outside_verified_regime,
    };
    for i in 0..series.len() {
        let (u, v) = (series.u[i], series.v[i]);
        if !(u >= 0.0 && v >= 0.0) {
            report.nodes_not_checked += 1;
            report.first_not_checked.get_or_insert(series.times[i]);
            continue;
        }
        report.nodes_checked += 1;
        let sides = [
            (Channel::U, series.du[i], form.damp_u * u, form.coef_u * v.powf(form.exp_u)),
            (Channel::V, series.dv[i], form.damp_v * v, form.coef_v * u.powf(form.exp_v)),
        ];
        for (channel, deriv, damping, rhs) in sides {
            let lhs = deriv + damping;
            let slack = (lhs - rhs) / (1.0 + lhs.abs());
            report.min_relative_slack = report.min_relative_slack.min(slack);
            if lhs + form.rel_tol * (1.0 + deriv.abs()) < rhs {
                report.violations.push(OdiViolation { index: i, t: series.times[i], channel, lhs, rhs });
            }
        }
    }
    report
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn params_validation() {
        let ok = SystemParams::heat(1, 2.0, 2.0);
        assert!(ok.validate_for_simulation().is_ok());
        assert!(SystemParams { p: 1.0, q: 1.0, ..ok }.validate().is_err());
        assert!(SystemParams { p: 1.5, q: 2.0, ..ok }.validate().is_err());
        assert!(SystemParams { beta1: Complex64::new(0.0, 0.0), ..ok }.validate().is_err());
        let anti = SystemParams { alpha1: Complex64::new(0.5, 1.0), ..ok };
        assert!(anti.validate().is_ok());
        assert!(anti.validate_for_simulation().is_err());
        assert!(SystemParams { n: 4, ..ok }.validate().is_err());
    }

    #[test]
    fn odi_gate_and_violation() {
        let mut s = FunctionalSeries::default();
        s.push(0.0, 1.0, 1.0, 2.0, 2.0);
        s.push(0.1, 1.0, -1.0, 2.0, 2.0);
        s.push(0.2, 1.0, 1.0, 0.5, 2.0);
        let form = OdiForm {
            damp_u: 0.0,
            damp_v: 0.0,
            coef_u: 1.0,
            exp_u: 2.0,
            coef_v: 1.0,
            exp_v: 2.0,
            rel_tol: 1e-8,
            outside_verified_regime: false,
        };
        let r = check_odi(&s, form);
        assert_eq!(r.nodes_checked, 2);
        assert_eq!(r.nodes_not_checked, 1);
        assert_eq!(r.first_not_checked, Some(0.1));
        assert_eq!(r.violations.len(), 1);
        assert_eq!(r.violations[0].channel, Channel::U);
        assert_eq!(r.violations[0].index, 2);
    }
}
