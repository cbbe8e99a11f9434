use serde::Serialize;

use super::CoupledOdeSpec;
use crate::error::{invalid, Result};

/// Explicit sub-solution for `g` derived from the conserved identity:
///
/// ```text
/// g_lower(t) = e^(-omega t/(p+1)) * ( {base - rate * S(t)}^(-(q+1)/(pq-1)) - shift )
/// ```
///
/// with `S(t) = t` for `omega = 0` and `S(t) = (1 - e^(-kappa t))/kappa`,
/// `kappa = omega (pq-1)/((p+1)(q+1))`, otherwise.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LowerBoundCurve {
    spec: CoupledOdeSpec,
    base: f64,
    rate: f64,
    kappa: f64,
    shift: f64,
}

impl LowerBoundCurve {
    fn new(spec: &CoupledOdeSpec) -> Self {
        let CoupledOdeSpec { p, q, c_p, c_q, omega, f0, g0 } = *spec;
        let d = p * q - 1.0;
        let base = (c_p / c_q).powf(d / ((p + 1.0) * (q + 1.0))) * f0.powf(-d / (p + 1.0));
        let rate = 2f64.powf(-p * q / (q + 1.0)) * d * c_p.powf(q / (q + 1.0)) * c_q.powf(1.0 / (q + 1.0));
        let kappa = omega * d / ((p + 1.0) * (q + 1.0));
        let gap = c_q / c_p * f0.powf(q + 1.0) - g0.powf(p + 1.0);
        Self { spec: *spec, base, rate, kappa, shift: gap.max(0.0).powf(1.0 / (p + 1.0)) }
    }

    fn elapsed(&self, t: f64) -> f64 {
        if self.kappa == 0.0 {
            t
        } else {
            -(-self.kappa * t).exp_m1() / self.kappa
        }
    }

    /// Time at which the bracket vanishes; `inf` if it never does.
    pub fn blowup_time(&self) -> f64 {
        let target = self.base / self.rate;
        if self.kappa == 0.0 {
            target
        } else if self.kappa * target < 1.0 {
            -(-self.kappa * target).ln_1p() / self.kappa
        } else {
            f64::INFINITY
        }
    }

    /// Lower bound on `g(t)`; `+inf` at and beyond the curve's blow-up time.
    pub fn eval(&self, t: f64) -> f64 {
        let bracket = self.base - self.rate * self.elapsed(t);
        if bracket <= 0.0 {
            return f64::INFINITY;
        }
        let (p, q) = (self.spec.p, self.spec.q);
        let undamped = bracket.powf(-(q + 1.0) / (p * q - 1.0)) - self.shift;
        (-self.spec.omega * t / (p + 1.0)).exp() * undamped
    }

    /// The matching lower bound for `f`, obtained by pushing `g_lower` through
    /// the (monotone) identity `f = {C_p/C_q g^(p+1) + (f0^(q+1) - C_p/C_q g0^(p+1)) e^(-omega t)}^(1/(q+1))`.
    pub fn eval_f(&self, t: f64) -> f64 {
        let s = &self.spec;
        let g = self.eval(t).max(0.0);
        if g.is_infinite() {
            return f64::INFINITY;
        }
        let ratio = s.c_p / s.c_q;
        let inner = ratio * g.powf(s.p + 1.0)
            + (s.f0.powf(s.q + 1.0) - ratio * s.g0.powf(s.p + 1.0)) * (-s.omega * t).exp();
        inner.max(0.0).powf(1.0 / (s.q + 1.0))
    }

    pub fn shift(&self) -> f64 {
        self.shift
    }
}

/// Lower-bound curve and lifespan bound for a coupled spec.
#[derive(Debug, Clone, PartialEq)]
pub struct BoundReport {
    pub hypothesis_satisfied: bool,
    /// `None` when the hypothesis fails.
    pub lifespan_bound: Option<f64>,
    pub lower_bound: Option<LowerBoundCurve>,
    /// Set when `p < 1` or `q < 1`; the formulas are evaluated but their derivation does not cover this case.
    pub outside_verified_regime: bool,
}

#[derive(Serialize)]
struct BoundReportJson {
    hypothesis_satisfied: bool,
    lifespan_bound: Option<f64>,
    outside_verified_regime: bool,
    lower_bound: Vec<[f64; 2]>,
}

impl BoundReport {
    fn failed(spec: &CoupledOdeSpec) -> Self {
        Self {
            hypothesis_satisfied: false,
            lifespan_bound: None,
            lower_bound: None,
            outside_verified_regime: spec.outside_superadditive_regime(),
        }
    }

    /// JSON with `hypothesis_satisfied`, `lifespan_bound` and `lower_bound`
    /// sampled as `[t, g_lower(t)]` pairs on `[0, 0.99 T]`.
    pub fn to_json(&self, samples: usize) -> serde_json::Value {
        let lower_bound = match (self.lower_bound, self.lifespan_bound) {
            (Some(curve), Some(t_max)) if t_max.is_finite() && samples > 1 => (0..samples)
                .map(|i| {
                    let t = 0.99 * t_max * i as f64 / (samples - 1) as f64;
                    [t, curve.eval(t)]
                })
                .collect(),
            _ => Vec::new(),
        };
        serde_json::to_value(BoundReportJson {
            hypothesis_satisfied: self.hypothesis_satisfied,
            lifespan_bound: self.lifespan_bound,
            outside_verified_regime: self.outside_verified_regime,
            lower_bound,
        })
        .expect("plain struct serializes")
    }
}

/// Bounds for the undamped system under `C_q f0^(q+1) >= C_p g0^(p+1)`.
pub fn prop23_bounds(spec: &CoupledOdeSpec) -> Result<BoundReport> {
    spec.validate()?;
    if spec.omega != 0.0 {
        return Err(invalid("undamped bounds require omega = 0"));
    }
    if spec.big_f(spec.f0) < spec.big_g(spec.g0) {
        return Ok(BoundReport::failed(spec));
    }
    let CoupledOdeSpec { p, q, c_p, c_q, f0, .. } = *spec;
    let d = p * q - 1.0;
    let lifespan = 2f64.powf(p * q / (q + 1.0)) / d
        * c_p.powf(-1.0 / (p + 1.0))
        * c_q.powf(-p / (p + 1.0))
        * f0.powf(-d / (p + 1.0));
    Ok(BoundReport {
        hypothesis_satisfied: true,
        lifespan_bound: Some(lifespan),
        lower_bound: Some(LowerBoundCurve::new(spec)),
        outside_verified_regime: spec.outside_superadditive_regime(),
    })
}

/// The two quantities whose maximum `f0` must strictly exceed for the damped bounds.
pub fn cor24_thresholds(spec: &CoupledOdeSpec) -> [f64; 2] {
    let CoupledOdeSpec { p, q, c_p, c_q, omega, g0, .. } = *spec;
    let d = p * q - 1.0;
    let e = (p + 1.0) / d;
    let damping = 2f64.powf((p + 1.0) / (q + 1.0) * p * q / d)
        * (q + 1.0).powf(-e)
        * (p + 1.0).powf(-e)
        * omega.powf(e)
        * c_p.powf(-1.0 / d)
        * c_q.powf(-p / d);
    let ordering = c_q.powf(-1.0 / (q + 1.0)) * c_p.powf(1.0 / (q + 1.0)) * g0.powf((p + 1.0) / (q + 1.0));
    [damping, ordering]
}

/// Bounds for the damped system (`omega > 0`); the hypothesis is the strict
/// inequality `max(thresholds) < f0`.
pub fn cor24_bounds(spec: &CoupledOdeSpec) -> Result<BoundReport> {
    spec.validate()?;
    if !(spec.omega > 0.0) {
        return Err(invalid("damped bounds require omega > 0"));
    }
    let [a, b] = cor24_thresholds(spec);
    if !(a.max(b) < spec.f0) {
        return Ok(BoundReport::failed(spec));
    }
    let CoupledOdeSpec { p, q, c_p, c_q, omega, f0, .. } = *spec;
    let d = p * q - 1.0;
    let pq1 = (p + 1.0) * (q + 1.0);
    let arg = 2f64.powf(p * q / (q + 1.0)) / pq1
        * omega
        * c_q.powf(-p / (p + 1.0))
        * c_p.powf(-1.0 / (p + 1.0))
        * f0.powf(-d / (p + 1.0));
    let lifespan = if arg > 0.0 && arg < 1.0 { -pq1 / (omega * d) * (-arg).ln_1p() } else { f64::INFINITY };
    Ok(BoundReport {
        hypothesis_satisfied: true,
        lifespan_bound: Some(lifespan),
        lower_bound: Some(LowerBoundCurve::new(spec)),
        outside_verified_regime: spec.outside_superadditive_regime(),
    })
}
