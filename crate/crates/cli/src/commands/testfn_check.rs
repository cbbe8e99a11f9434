use std::f64::consts::PI;
use std::fs::File;
use std::io::BufWriter;

use blowup_core::testfn::build_test_function;
use serde::{Deserialize, Serialize};
use serde_json::json;

use crate::config::{config_err, Versioned};
use crate::output::{manifest, plot, OutDir};
use crate::{CliError, Outcome, RunOptions};

pub const DEFAULT_CONFIG: &str = r#"{"schema_version": 1}"#;

fn d_dims() -> Vec<usize> {
    vec![1, 2, 3]
}
fn d_resolution() -> usize {
    2048
}
fn d_tol() -> f64 {
    1e-8
}
fn d_profile() -> usize {
    256
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TestfnConfig {
    pub schema_version: u32,
    #[serde(default = "d_dims")]
    pub dimensions: Vec<usize>,
    /// Radial grid for the inequality check.
    #[serde(default = "d_resolution")]
    pub resolution: usize,
    /// Allowed value of `max(-Laplace phi - lambda_eff phi)`.
    #[serde(default = "d_tol")]
    pub tolerance: f64,
    #[serde(default = "d_profile")]
    pub profile_resolution: usize,
}

impl Versioned for TestfnConfig {
    fn schema_version(&self) -> u32 {
        self.schema_version
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct DimensionReport {
    pub n: usize,
    pub lambda: f64,
    pub lambda_eff: f64,
    pub l1_norm: f64,
    pub max_violation: f64,
    pub eigen_residual: f64,
    /// Deviation from the closed forms `pi^2/4` and `1` (one dimension only).
    pub reference_error: Option<f64>,
    pub passed: bool,
}

pub fn run(cfg: &TestfnConfig, opts: &RunOptions) -> Result<Outcome, CliError> {
    if cfg.dimensions.is_empty() || cfg.dimensions.iter().any(|n| !(1..=3).contains(n)) {
        return Err(config_err("dimensions must be a non-empty list drawn from 1, 2, 3"));
    }
    if cfg.resolution < 64 || cfg.profile_resolution < 2 || !(cfg.tolerance >= 0.0) {
        return Err(config_err("resolution must be at least 64 and tolerance non-negative"));
    }
    let mut reports = Vec::new();
    let mut functions = Vec::new();
    for &n in &cfg.dimensions {
        let tf = build_test_function(n)?;
        let max_violation = tf.verify_phi_inequality(cfg.resolution)?;
        let reference_error =
            (n == 1).then(|| (tf.lambda - PI * PI / 4.0).abs().max((tf.l1_norm - 1.0).abs()));
        reports.push(DimensionReport {
            n,
            lambda: tf.lambda,
            lambda_eff: tf.lambda_eff(),
            l1_norm: tf.l1_norm,
            max_violation,
            eigen_residual: tf.eigen_residual(cfg.resolution),
            reference_error,
            passed: max_violation <= cfg.tolerance && reference_error.map_or(true, |e| e <= 1e-10),
        });
        functions.push(tf);
    }
    let passed = reports.iter().all(|r| r.passed);

    let out = OutDir::create(&opts.out)?;
    let mut plots = Vec::new();
    for tf in &functions {
        let name = format!("profile_n{}.csv", tf.dimension);
        tf.write_profile_csv(BufWriter::new(File::create(out.path().join(&name))?), cfg.profile_resolution)?;
        plots.push(plot(&format!("weight profile, n = {}", tf.dimension), &name, "r", &["phi", "lap_phi"], false, false));
    }
    out.json("plots.json", &manifest(plots, json!({})))?;
    out.report(json!({ "passed": passed, "dimensions": reports }), "testfn-check")?;
    Ok(Outcome::from_checks(passed))
}
