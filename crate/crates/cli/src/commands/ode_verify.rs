//! Seeded property suite for the coupled ODE: conserved identity, the
//! symmetric worked case, dominance of the explicit lower bounds and lifespan
//! bounds, and preservation of ordering.

use blowup_core::ode::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use serde_json::json;

use crate::config::{config_err, Versioned};
use crate::output::{manifest, plot, OutDir};
use crate::{CliError, Outcome, RunOptions};

pub const DEFAULT_CONFIG: &str = r#"{"schema_version": 1}"#;
pub const DEFAULT_SEED: u64 = 20240917;

/// Which identity residual decides pass/fail.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ResidualGate {
    /// Deviation normalised by `max(1, |F(0) - G(0)|)`.
    #[default]
    Literal,
    /// Deviation normalised by the size of the differenced terms.
    Relative,
}

fn d_identity() -> usize {
    50
}
fn d_bounds() -> usize {
    20
}
fn d_pairs() -> usize {
    20
}
fn d_threshold() -> f64 {
    1e6
}
fn d_tol() -> f64 {
    1e-11
}
fn d_limit() -> f64 {
    1e-7
}
fn d_range() -> [f64; 2] {
    [1.0, 4.0]
}
fn d_omega() -> [f64; 2] {
    [0.1, 2.0]
}
fn d_coef() -> [f64; 2] {
    [0.5, 2.0]
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OdeVerifyConfig {
    pub schema_version: u32,
    #[serde(default)]
    pub seed: Option<u64>,
    #[serde(default = "d_identity")]
    pub identity_samples: usize,
    #[serde(default = "d_bounds")]
    pub bound_specs: usize,
    #[serde(default = "d_pairs")]
    pub comparison_pairs: usize,
    #[serde(default = "d_threshold")]
    pub threshold: f64,
    #[serde(default = "d_tol")]
    pub tolerance: f64,
    #[serde(default = "d_limit")]
    pub residual_limit: f64,
    #[serde(default)]
    pub residual_gate: ResidualGate,
    #[serde(default = "d_range")]
    pub p_range: [f64; 2],
    #[serde(default = "d_range")]
    pub q_range: [f64; 2],
    #[serde(default = "d_omega")]
    pub omega_range: [f64; 2],
    /// Range for `C_p`, `C_q`, `f0` and `g0`.
    #[serde(default = "d_coef")]
    pub coefficient_range: [f64; 2],
}

impl Versioned for OdeVerifyConfig {
    fn schema_version(&self) -> u32 {
        self.schema_version
    }
}

impl OdeVerifyConfig {
    pub fn validate(&self) -> Result<(), CliError> {
        let ranges = [self.p_range, self.q_range, self.omega_range, self.coefficient_range];
        if ranges.iter().any(|[a, b]| !(a.is_finite() && b.is_finite() && *a > 0.0 && a < b)) {
            return Err(config_err("ranges must be finite, positive and increasing"));
        }
        if self.p_range[1] * self.q_range[1] <= 1.0 {
            return Err(config_err("the (p, q) ranges admit no pair with pq > 1"));
        }
        if self.identity_samples == 0 || self.bound_specs == 0 || self.comparison_pairs == 0 {
            return Err(config_err("sample counts must be positive"));
        }
        if !(self.threshold > 1.0 && self.tolerance > 0.0 && self.tolerance < 1e-3 && self.residual_limit > 0.0) {
            return Err(config_err("threshold must exceed 1; tolerance and residual_limit must be positive"));
        }
        Ok(())
    }
}

const T_END: f64 = 1e8;

fn sample_spec(rng: &mut ChaCha8Rng, cfg: &OdeVerifyConfig, damped: bool) -> CoupledOdeSpec {
    let r = |rng: &mut ChaCha8Rng, [a, b]: [f64; 2]| rng.gen_range(a..b);
    loop {
        let p = r(rng, cfg.p_range);
        let q = r(rng, cfg.q_range);
        if p * q <= 1.0 {
            continue;
        }
        let omega = if damped { r(rng, cfg.omega_range) } else { 0.0 };
        let c = cfg.coefficient_range;
        return CoupledOdeSpec { p, q, c_p: r(rng, c), c_q: r(rng, c), omega, f0: r(rng, c), g0: r(rng, c) };
    }
}

/// Raises `f0` above the damped blow-up thresholds.
fn lift_above_thresholds(spec: CoupledOdeSpec, factor: f64) -> CoupledOdeSpec {
    if spec.omega == 0.0 {
        return spec;
    }
    let [a, b] = cor24_thresholds(&spec);
    spec.with_initial(spec.f0.max(a.max(b) * factor), spec.g0)
}

#[derive(Debug, Clone, Serialize)]
pub struct IdentityCase {
    pub index: usize,
    pub spec: CoupledOdeSpec,
    pub status: TrajectoryStatus,
    pub max_reached: f64,
    pub lifespan: Option<f64>,
    pub residual_literal: f64,
    pub residual_relative: f64,
    pub passed: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct BoundCase {
    pub index: usize,
    pub spec: CoupledOdeSpec,
    pub hypothesis_satisfied: bool,
    pub escape_time: Option<f64>,
    pub lifespan_bound: Option<f64>,
    /// `min (g - g_lower)` over the trajectory nodes.
    pub min_margin: f64,
    pub passed: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct ComparisonCase {
    pub index: usize,
    pub spec: CoupledOdeSpec,
    pub sub_f0: f64,
    pub sub_g0: f64,
    pub verdict: ComparisonVerdict,
    pub passed: bool,
}

fn identity_case(index: usize, spec: CoupledOdeSpec, cfg: &OdeVerifyConfig) -> Result<IdentityCase, CliError> {
    let traj = integrate_coupled(&spec, T_END, cfg.tolerance, cfg.threshold)?;
    let residual_literal = conserved_residual(&traj, &spec);
    let residual_relative = conserved_residual_relative(&traj, &spec);
    let gated = match cfg.residual_gate {
        ResidualGate::Literal => residual_literal,
        ResidualGate::Relative => residual_relative,
    };
    let [f, g] = traj.final_value();
    Ok(IdentityCase {
        index,
        spec,
        status: traj.status(),
        max_reached: f.max(g),
        lifespan: tail_corrected_lifespan(&traj, &spec),
        residual_literal,
        residual_relative,
        passed: gated < cfg.residual_limit,
    })
}

fn bound_case(index: usize, spec: CoupledOdeSpec, cfg: &OdeVerifyConfig) -> Result<BoundCase, CliError> {
    let report = if spec.omega == 0.0 { prop23_bounds(&spec)? } else { cor24_bounds(&spec)? };
    let traj = integrate_coupled(&spec, T_END, cfg.tolerance, cfg.threshold)?;
    let escape_time = tail_corrected_lifespan(&traj, &spec);
    let min_margin = match report.lower_bound {
        Some(curve) => traj
            .times()
            .iter()
            .zip(traj.values())
            .map(|(t, [_, g])| g - curve.eval(*t))
            .fold(f64::INFINITY, f64::min),
        None => f64::NAN,
    };
    let passed = report.hypothesis_satisfied
        && min_margin >= -1e-9
        && matches!((escape_time, report.lifespan_bound), (Some(e), Some(b)) if e <= b);
    Ok(BoundCase {
        index,
        spec,
        hypothesis_satisfied: report.hypothesis_satisfied,
        escape_time,
        lifespan_bound: report.lifespan_bound,
        min_margin,
        passed,
    })
}

fn comparison_case(index: usize, spec: CoupledOdeSpec, sub: (f64, f64), cfg: &OdeVerifyConfig) -> Result<ComparisonCase, CliError> {
    let sup = integrate_coupled(&spec, T_END, cfg.tolerance, cfg.threshold)?;
    let lower = integrate_coupled(&spec.with_initial(sub.0, sub.1), sup.final_time(), cfg.tolerance, cfg.threshold * 1e6)?;
    let verdict = check_comparison(&lower, &sup)?;
    Ok(ComparisonCase { index, spec, sub_f0: sub.0, sub_g0: sub.1, passed: verdict.passed(), verdict })
}

fn spec_row(s: &CoupledOdeSpec) -> Vec<f64> {
    vec![s.p, s.q, s.c_p, s.c_q, s.omega, s.f0, s.g0]
}

const SPEC_HEADER: [&str; 7] = ["p", "q", "c_p", "c_q", "omega", "f0", "g0"];

fn header(extra: &[&'static str]) -> Vec<&'static str> {
    let mut h = vec!["index"];
    h.extend(SPEC_HEADER);
    h.extend(extra);
    h
}

pub fn run(cfg: &OdeVerifyConfig, opts: &RunOptions) -> Result<Outcome, CliError> {
    cfg.validate()?;
    let seed = opts.seed.or(cfg.seed).unwrap_or(DEFAULT_SEED);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);

    // all sampling happens up front so the parallel phase cannot perturb the stream
    let identity_specs: Vec<CoupledOdeSpec> = (0..cfg.identity_samples)
        .map(|_| {
            let damped = rng.gen_bool(0.5);
            let spec = sample_spec(&mut rng, cfg, damped);
            lift_above_thresholds(spec, 1.5)
        })
        .collect();
    let bound_specs: Vec<CoupledOdeSpec> = (0..cfg.bound_specs)
        .map(|i| {
            let spec = sample_spec(&mut rng, cfg, i % 2 == 1);
            if spec.omega == 0.0 {
                // ordering hypothesis C_q f0^(q+1) >= C_p g0^(p+1)
                let g_max = (spec.c_q / spec.c_p * spec.f0.powf(spec.q + 1.0)).powf(1.0 / (spec.p + 1.0));
                spec.with_initial(spec.f0, g_max * rng.gen_range(0.5..0.95))
            } else {
                let [a, b] = cor24_thresholds(&spec);
                spec.with_initial(a.max(b) * rng.gen_range(1.05..3.0), spec.g0)
            }
        })
        .collect();
    let pairs: Vec<(CoupledOdeSpec, (f64, f64))> = (0..cfg.comparison_pairs)
        .map(|i| {
            let spec = lift_above_thresholds(sample_spec(&mut rng, cfg, i % 2 == 1), 2.0);
            let sub = (spec.f0 * rng.gen_range(0.5..0.99), spec.g0 * rng.gen_range(0.5..0.99));
            (spec, sub)
        })
        .collect();

    let pool = opts.pool()?;
    let (identity, bounds, comparison) = pool.install(|| -> Result<_, CliError> {
        let identity: Vec<IdentityCase> = identity_specs
            .par_iter()
            .enumerate()
            .map(|(i, s)| identity_case(i, *s, cfg))
            .collect::<Result<_, _>>()?;
        let bounds: Vec<BoundCase> =
            bound_specs.par_iter().enumerate().map(|(i, s)| bound_case(i, *s, cfg)).collect::<Result<_, _>>()?;
        let comparison: Vec<ComparisonCase> = pairs
            .par_iter()
            .enumerate()
            .map(|(i, (s, sub))| comparison_case(i, *s, *sub, cfg))
            .collect::<Result<_, _>>()?;
        Ok((identity, bounds, comparison))
    })?;

    let worked_spec = CoupledOdeSpec { p: 2.0, q: 2.0, c_p: 1.0, c_q: 1.0, omega: 0.0, f0: 1.0, g0: 1.0 };
    let worked_traj = integrate_coupled(&worked_spec, 10.0, cfg.tolerance, 1e6)?;
    let worked_lifespan = tail_corrected_lifespan(&worked_traj, &worked_spec);
    let worked_bound = prop23_bounds(&worked_spec)?;
    let worked_passed = worked_bound.hypothesis_satisfied
        && matches!((worked_lifespan, worked_bound.lifespan_bound),
            (Some(t), Some(b)) if (t - 1.0 / 3.0).abs() <= 1e-4 && t <= b);

    let identity_passed = identity.iter().all(|c| c.passed);
    let bounds_passed = bounds.iter().all(|c| c.passed);
    let comparison_passed = comparison.iter().all(|c| c.passed);
    let passed = identity_passed && bounds_passed && comparison_passed && worked_passed;
    let max_of = |f: fn(&IdentityCase) -> f64| identity.iter().map(f).fold(0.0, f64::max);

    let out = OutDir::create(&opts.out)?;
    out.csv(
        "identity.csv",
        &header(&["max_reached", "residual_literal", "residual_relative", "lifespan"]),
        identity.iter().map(|c| {
            let mut row = vec![c.index as f64];
            row.extend(spec_row(&c.spec));
            row.extend([c.max_reached, c.residual_literal, c.residual_relative, c.lifespan.unwrap_or(f64::NAN)]);
            row
        }),
    )?;
    out.csv(
        "bounds.csv",
        &header(&["escape_time", "lifespan_bound", "min_margin"]),
        bounds.iter().map(|c| {
            let mut row = vec![c.index as f64];
            row.extend(spec_row(&c.spec));
            row.extend([c.escape_time.unwrap_or(f64::NAN), c.lifespan_bound.unwrap_or(f64::NAN), c.min_margin]);
            row
        }),
    )?;
    out.csv(
        "comparison.csv",
        &header(&["sub_f0", "sub_g0", "passed"]),
        comparison.iter().map(|c| {
            let mut row = vec![c.index as f64];
            row.extend(spec_row(&c.spec));
            row.extend([c.sub_f0, c.sub_g0, if c.passed { 1.0 } else { 0.0 }]);
            row
        }),
    )?;
    let curve = worked_bound.lower_bound.expect("worked case satisfies the hypothesis");
    out.csv(
        "worked_case.csv",
        &["t", "f", "g", "g_lower"],
        worked_traj.times().iter().zip(worked_traj.values()).map(|(t, [f, g])| vec![*t, *f, *g, curve.eval(*t)]),
    )?;
    out.json(
        "plots.json",
        &manifest(
            vec![
                plot("worked case and lower bound", "worked_case.csv", "t", &["f", "g", "g_lower"], false, true),
                plot("identity residuals", "identity.csv", "max_reached", &["residual_literal", "residual_relative"], true, true),
                plot("escape time vs bound", "bounds.csv", "lifespan_bound", &["escape_time"], false, false),
            ],
            json!({}),
        ),
    )?;
    let failures = |ok: &dyn Fn(usize) -> bool, n: usize| (0..n).filter(|i| !ok(*i)).collect::<Vec<_>>();
    out.report(
        json!({
            "seed": seed,
            "passed": passed,
            "identity": {
                "passed": identity_passed,
                "gate": cfg.residual_gate,
                "limit": cfg.residual_limit,
                "threshold": cfg.threshold,
                "max_residual_literal": max_of(|c| c.residual_literal),
                "max_residual_relative": max_of(|c| c.residual_relative),
                "min_max_reached": identity.iter().map(|c| c.max_reached).fold(f64::INFINITY, f64::min),
                "failures": failures(&|i| identity[i].passed, identity.len()).iter().map(|i| &identity[*i]).collect::<Vec<_>>(),
                "cases": identity,
            },
            "worked_case": {
                "passed": worked_passed,
                "spec": worked_spec,
                "lifespan": worked_lifespan,
                "expected_lifespan": 1.0 / 3.0,
                "threshold_time": worked_traj.final_time(),
                "lifespan_bound": worked_bound.lifespan_bound,
                "expected_bound": 2f64.powf(4.0 / 3.0) / 3.0,
            },
            "bound_dominance": {
                "passed": bounds_passed,
                "failures": failures(&|i| bounds[i].passed, bounds.len()).iter().map(|i| &bounds[*i]).collect::<Vec<_>>(),
                "cases": bounds,
            },
            "comparison": {
                "passed": comparison_passed,
                "failures": failures(&|i| comparison[i].passed, comparison.len()).iter().map(|i| &comparison[*i]).collect::<Vec<_>>(),
                "cases": comparison,
            },
        }),
        "ode-verify",
    )?;
    Ok(Outcome::from_checks(passed))
}
