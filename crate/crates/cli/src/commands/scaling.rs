//! Lifespan against data amplitude on a geometric ladder, with the log-log
//! slope compared to the predicted exponent.

use blowup_core::euclid::{run_euclid, EuclidRunSpec};
use blowup_core::system::SystemParams;
use blowup_core::testfn::build_test_function;
use blowup_core::torus::{run_torus, RunStatus, TorusRunConfig};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use serde_json::json;

use crate::config::{config_err, Versioned};
use crate::output::{manifest, plot, OutDir};
use crate::stats::ols;
use crate::{CliError, Outcome, RunOptions};

/// `start * ratio^k` for `k = 0..count`.
#[derive(Debug, Clone, Copy, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct Ladder {
    pub start: f64,
    pub ratio: f64,
    pub count: usize,
}

impl Ladder {
    pub fn values(&self) -> Vec<f64> {
        (0..self.count).map(|k| self.start * self.ratio.powi(k as i32)).collect()
    }
}

/// Exactly one of `euclid` (data amplitude `data.epsilon` is replaced by the
/// ladder) or `torus` (constant data, means multiplied by the ladder).
#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScalingConfig {
    pub schema_version: u32,
    pub ladder: Ladder,
    /// Allowed relative deviation of the slope; 0.15 (Euclidean) or 0.10 (torus) when absent.
    #[serde(default)]
    pub tolerance: Option<f64>,
    #[serde(default)]
    pub euclid: Option<EuclidRunSpec>,
    #[serde(default)]
    pub torus: Option<TorusRunConfig>,
}

impl Versioned for ScalingConfig {
    fn schema_version(&self) -> u32 {
        self.schema_version
    }
}

pub const MIN_LADDER: usize = 5;
pub const MIN_COMPLETE: usize = 4;

fn critical(params: &SystemParams) -> bool {
    let a = params.rate_exponents().0;
    let half_n = params.n as f64 / 2.0;
    (a - half_n).abs() <= 1e-12 * half_n
}

impl ScalingConfig {
    pub fn validate(&self) -> Result<(), CliError> {
        let Ladder { start, ratio, count } = self.ladder;
        if count < MIN_LADDER {
            return Err(config_err(format!("the amplitude ladder needs at least {MIN_LADDER} points")));
        }
        if !(start > 0.0 && start.is_finite() && ratio > 0.0 && ratio.is_finite() && ratio != 1.0) {
            return Err(config_err("ladder start and ratio must be positive and ratio != 1"));
        }
        if let Some(t) = self.tolerance {
            if !(t > 0.0) {
                return Err(config_err("tolerance must be positive"));
            }
        }
        match (&self.euclid, &self.torus) {
            (Some(e), None) => {
                if critical(&e.params) {
                    return Err(config_err("critical case (p+1)/(pq-1) = n/2: the lifespan exponent is undefined"));
                }
                e.validate().map_err(config_err)
            }
            (None, Some(t)) => {
                t.validate().map_err(config_err)?;
                if !(t.u0.modes.is_empty() && t.v0.modes.is_empty()) {
                    return Err(config_err("torus scaling runs in homogeneous mode: data must be constant"));
                }
                Ok(())
            }
            _ => Err(config_err("exactly one of `euclid` and `torus` must be given")),
        }
    }

    fn params(&self) -> SystemParams {
        match (&self.euclid, &self.torus) {
            (Some(e), _) => e.params,
            (_, Some(t)) => t.params,
            _ => unreachable!("validated"),
        }
    }

    /// `-1/((p+1)/(pq-1) - n/2)` on the Euclidean side, `-(pq-1)/(p+1)` on the torus.
    pub fn predicted_slope(&self) -> f64 {
        let params = self.params();
        let a = params.rate_exponents().0;
        if self.euclid.is_some() {
            -1.0 / (a - params.n as f64 / 2.0)
        } else {
            -1.0 / a
        }
    }

    fn tolerance(&self) -> f64 {
        self.tolerance.unwrap_or(if self.euclid.is_some() { 0.15 } else { 0.10 })
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct LadderPoint {
    pub epsilon: f64,
    pub status: RunStatus,
    pub steps: usize,
    pub lifespan: Option<f64>,
    pub complete: bool,
}

fn run_point(cfg: &ScalingConfig, epsilon: f64) -> Result<LadderPoint, CliError> {
    let (status, steps, lifespan) = if let Some(base) = &cfg.euclid {
        let mut spec = base.clone();
        spec.data.epsilon = epsilon;
        let tf = build_test_function(spec.params.n)?;
        let run = run_euclid(&spec, &tf)?;
        (run.status, run.steps, run.escape_time(&spec.params))
    } else {
        let mut config = cfg.torus.clone().expect("validated");
        config.u0.mean *= epsilon;
        config.v0.mean *= epsilon;
        let run = run_torus(&config)?;
        (run.status, run.steps, run.blowup_estimate(&config.params))
    };
    Ok(LadderPoint { epsilon, status, steps, lifespan, complete: lifespan.is_some() })
}

pub fn run(cfg: &ScalingConfig, opts: &RunOptions) -> Result<Outcome, CliError> {
    cfg.validate()?;
    let pool = opts.pool()?;
    let points: Vec<LadderPoint> = pool.install(|| {
        cfg.ladder.values().par_iter().map(|e| run_point(cfg, *e)).collect::<Result<_, _>>()
    })?;

    let complete: Vec<&LadderPoint> = points.iter().filter(|p| p.complete).collect();
    let xs: Vec<f64> = complete.iter().map(|p| p.epsilon.ln()).collect();
    let ys: Vec<f64> = complete.iter().map(|p| p.lifespan.expect("complete").ln()).collect();
    let fit = if complete.len() >= MIN_COMPLETE { ols(&xs, &ys) } else { None };
    let predicted = cfg.predicted_slope();
    let relative_error = fit.map(|f| (f.slope / predicted - 1.0).abs());
    let passed = relative_error.is_some_and(|e| e <= cfg.tolerance());

    let out = OutDir::create(&opts.out)?;
    out.csv(
        "scaling.csv",
        &["epsilon", "lifespan", "complete", "steps"],
        points.iter().map(|p| {
            vec![p.epsilon, p.lifespan.unwrap_or(f64::NAN), if p.complete { 1.0 } else { 0.0 }, p.steps as f64]
        }),
    )?;
    out.json(
        "plots.json",
        &manifest(
            vec![plot("lifespan against amplitude", "scaling.csv", "epsilon", &["lifespan"], true, true)],
            json!({ "lifespan": predicted }),
        ),
    )?;
    out.report(
        json!({
            "mode": if cfg.euclid.is_some() { "euclid" } else { "torus" },
            "ladder": cfg.ladder,
            "points": points,
            "complete_points": complete.len(),
            "fit": fit,
            "predicted_slope": predicted,
            "relative_error": relative_error,
            "tolerance": cfg.tolerance(),
            "passed": passed,
        }),
        "scaling-study",
    )?;
    Ok(Outcome::from_checks(passed))
}
