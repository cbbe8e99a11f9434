//! Scalar and weakly coupled blow-up ODEs: closed forms, adaptive integration,
//! conserved identities, explicit lower bounds and the ordering check.

mod bounds;
mod compare;
mod integrate;
mod interp;

pub use bounds::{cor24_bounds, cor24_thresholds, prop23_bounds, BoundReport, LowerBoundCurve};
pub use compare::{check_comparison, ComparisonVerdict, Component};
pub use integrate::{integrate_coupled, tail_corrected_lifespan, IntegratorOptions};
pub use interp::MonotoneCubic;

use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::io::fmt_num;

/// `f' = mu f^rho`, `f(0) = f0`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SingleOdeSpec {
    pub rho: f64,
    pub mu: f64,
    pub f0: f64,
}

impl SingleOdeSpec {
    pub fn new(rho: f64, mu: f64, f0: f64) -> Result<Self> {
        let spec = Self { rho, mu, f0 };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.rho > 1.0 && self.rho.is_finite()) {
            return Err(invalid(format!("rho must exceed 1, got {}", self.rho)));
        }
        if !(self.mu > 0.0 && self.mu.is_finite()) {
            return Err(invalid(format!("mu must be positive, got {}", self.mu)));
        }
        if !(self.f0 > 0.0 && self.f0.is_finite()) {
            return Err(invalid(format!("f0 must be positive, got {}", self.f0)));
        }
        Ok(())
    }

    /// `T_f = f0^(1-rho) / (mu (rho - 1))`.
    pub fn blowup_time(&self) -> f64 {
        self.f0.powf(1.0 - self.rho) / (self.mu * (self.rho - 1.0))
    }

    /// Explicit solution `{f0^(1-rho) - (rho-1) mu t}^(-1/(rho-1))` on `[0, T_f)`.
    pub fn solution(&self, t: f64) -> Result<f64> {
        self.validate()?;
        let blowup_time = self.blowup_time();
        if !(t >= 0.0) || t >= blowup_time {
            return Err(Error::Domain { t, blowup_time });
        }
        let base = self.f0.powf(1.0 - self.rho) - (self.rho - 1.0) * self.mu * t;
        Ok(base.powf(-1.0 / (self.rho - 1.0)))
    }
}

pub fn single_blowup_solution(spec: &SingleOdeSpec, t: f64) -> Result<f64> {
    spec.solution(t)
}

/// Coefficients and data of the damped weakly coupled system
///
/// ```text
/// f' + omega/(q+1) f = (p+1) C_p g^p
/// g' + omega/(p+1) g = (q+1) C_q f^q
/// ```
///
/// `omega = 0` is the undamped system.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CoupledOdeSpec {
    pub p: f64,
    pub q: f64,
    pub c_p: f64,
    pub c_q: f64,
    pub omega: f64,
    pub f0: f64,
    pub g0: f64,
}

impl CoupledOdeSpec {
    pub fn validate(&self) -> Result<()> {
        let all = [self.p, self.q, self.c_p, self.c_q, self.omega, self.f0, self.g0];
        if all.iter().any(|x| !x.is_finite()) {
            return Err(invalid("coupled ODE spec has non-finite entries"));
        }
        if self.p <= 0.0 || self.q <= 0.0 {
            return Err(invalid(format!("p, q must be positive, got p={}, q={}", self.p, self.q)));
        }
        if self.p * self.q <= 1.0 {
            return Err(invalid(format!("pq must exceed 1, got {}", self.p * self.q)));
        }
        if self.c_p <= 0.0 || self.c_q <= 0.0 {
            return Err(invalid("C_p and C_q must be positive"));
        }
        if self.omega < 0.0 {
            return Err(invalid("omega must be non-negative"));
        }
        if self.f0 <= 0.0 || self.g0 <= 0.0 {
            return Err(invalid("f0 and g0 must be positive"));
        }
        Ok(())
    }

    pub fn with_initial(mut self, f0: f64, g0: f64) -> Self {
        self.f0 = f0;
        self.g0 = g0;
        self
    }

    /// Right-hand side `(f', g')` at state `y = [f, g]`.
    pub fn rhs(&self, y: [f64; 2]) -> [f64; 2] {
        let [f, g] = y;
        [
            (self.p + 1.0) * self.c_p * g.max(0.0).powf(self.p) - self.omega / (self.q + 1.0) * f,
            (self.q + 1.0) * self.c_q * f.max(0.0).powf(self.q) - self.omega / (self.p + 1.0) * g,
        ]
    }

    /// `F = C_q f^(q+1)`.
    pub fn big_f(&self, f: f64) -> f64 {
        self.c_q * f.powf(self.q + 1.0)
    }

    /// `G = C_p g^(p+1)`.
    pub fn big_g(&self, g: f64) -> f64 {
        self.c_p * g.powf(self.p + 1.0)
    }

    /// Blow-up exponents `((p+1)/(pq-1), (q+1)/(pq-1))` of `f` and `g`.
    pub fn rate_exponents(&self) -> (f64, f64) {
        let d = self.p * self.q - 1.0;
        ((self.p + 1.0) / d, (self.q + 1.0) / d)
    }

    /// True when `p < 1` or `q < 1`, where the superadditivity step behind the
    /// lower bounds is not available.
    pub fn outside_superadditive_regime(&self) -> bool {
        self.p < 1.0 || self.q < 1.0
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum TrajectoryStatus {
    Completed,
    BlowUpThresholdReached { threshold: f64 },
    StepSizeCollapse,
}

/// Time-sampled `(f, g)` path.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    times: Vec<f64>,
    values: Vec<[f64; 2]>,
    status: TrajectoryStatus,
}

impl Trajectory {
    pub fn new(times: Vec<f64>, values: Vec<[f64; 2]>, status: TrajectoryStatus) -> Result<Self> {
        if times.is_empty() || times.len() != values.len() {
            return Err(invalid("trajectory needs equally many (>0) times and values"));
        }
        if times.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(invalid("trajectory times must be strictly increasing"));
        }
        if values.iter().flatten().any(|v| !v.is_finite() || *v < 0.0) {
            return Err(invalid("trajectory values must be finite and non-negative"));
        }
        if let TrajectoryStatus::BlowUpThresholdReached { threshold } = status {
            let [f, g] = values[values.len() - 1];
            if f.max(g) < threshold {
                return Err(invalid("threshold status requires final max(f, g) >= threshold"));
            }
        }
        Ok(Self { times, values, status })
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }

    pub fn values(&self) -> &[[f64; 2]] {
        &self.values
    }

    pub fn status(&self) -> TrajectoryStatus {
        self.status
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn final_time(&self) -> f64 {
        self.times[self.times.len() - 1]
    }

    pub fn final_value(&self) -> [f64; 2] {
        self.values[self.values.len() - 1]
    }

    /// Nodes with `max(f, g) <= cap`.
    pub fn truncated(&self, cap: f64) -> Trajectory {
        let n = self.values.iter().take_while(|v| v[0].max(v[1]) <= cap).count().max(1);
        Trajectory {
            times: self.times[..n].to_vec(),
            values: self.values[..n].to_vec(),
            status: if n == self.len() { self.status } else { TrajectoryStatus::Completed },
        }
    }

    /// CSV with header `t,f,g`.
    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut out = csv::Writer::from_writer(w);
        out.write_record(["t", "f", "g"])?;
        for (t, [f, g]) in self.times.iter().zip(&self.values) {
            out.write_record([fmt_num(*t), fmt_num(*f), fmt_num(*g)])?;
        }
        out.flush()?;
        Ok(())
    }
}

/// Worst deviation from the conserved identity
/// `(F - G) e^(omega t) = F(0) - G(0)`, normalised by `max(1, |F(0) - G(0)|)`.
pub fn conserved_residual(traj: &Trajectory, spec: &CoupledOdeSpec) -> f64 {
    identity_deviation(traj, spec, |gap0, _, _| gap0.abs().max(1.0))
}

/// Same deviation normalised by the magnitude of the terms being differenced,
/// `max(1, |F(0) - G(0)|, F e^(omega t), G e^(omega t))`. This is the form that
/// stays meaningful in double precision once `F` and `G` grow large.
pub fn conserved_residual_relative(traj: &Trajectory, spec: &CoupledOdeSpec) -> f64 {
    identity_deviation(traj, spec, |gap0, ft, gt| gap0.abs().max(1.0).max(ft).max(gt))
}

fn identity_deviation(
    traj: &Trajectory,
    spec: &CoupledOdeSpec,
    scale: impl Fn(f64, f64, f64) -> f64,
) -> f64 {
    let [f0, g0] = traj.values[0];
    let t0 = traj.times[0];
    let gap0 = spec.big_f(f0) - spec.big_g(g0);
    traj.times
        .iter()
        .zip(&traj.values)
        .map(|(t, [f, g])| {
            let growth = (spec.omega * (t - t0)).exp();
            let ft = spec.big_f(*f) * growth;
            let gt = spec.big_g(*g) * growth;
            ((ft - gt) - gap0).abs() / scale(gap0, ft, gt)
        })
        .fold(0.0, f64::max)
}
