use blowup_core::euclid::{run_euclid, EuclidReport, EuclidRun, EuclidRunSpec};
use blowup_core::system::FunctionalSeries;
use blowup_core::testfn::build_test_function;
use blowup_core::torus::RunStatus;
use serde::Deserialize;
use serde_json::{json, Value};

use crate::config::{config_err, Versioned};
use crate::output::{manifest, plot, OutDir};
use crate::{CliError, Outcome, RunOptions};

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EuclidRunFile {
    pub schema_version: u32,
    pub euclid: EuclidRunSpec,
    /// Repeat the run on a box of twice the half-width and compare functionals.
    #[serde(default)]
    pub box_doubling: bool,
}

impl Versioned for EuclidRunFile {
    fn schema_version(&self) -> u32 {
        self.schema_version
    }
}

pub const BOX_DOUBLING_LIMIT: f64 = 1e-6;

/// Largest relative difference of `U` and `V` between two runs, with the
/// second series linearly interpolated to the nodes of the first.
pub fn max_relative_difference(a: &FunctionalSeries, b: &FunctionalSeries) -> f64 {
    let interp = |ys: &[f64], t: f64| -> Option<f64> {
        let j = b.times.partition_point(|s| *s < t);
        if j < b.times.len() && b.times[j] == t {
            return Some(ys[j]);
        }
        if j == 0 || j >= b.times.len() {
            return None;
        }
        let w = (t - b.times[j - 1]) / (b.times[j] - b.times[j - 1]);
        Some(ys[j - 1] + w * (ys[j] - ys[j - 1]))
    };
    let mut worst = 0.0f64;
    for (i, &t) in a.times.iter().enumerate() {
        for (ya, yb) in [(&a.u, &b.u), (&a.v, &b.v)] {
            if let Some(other) = interp(yb, t) {
                worst = worst.max((ya[i] - other).abs() / ya[i].abs().max(f64::MIN_POSITIVE));
            }
        }
    }
    worst
}

pub fn checks(report: &EuclidReport, doubling: Option<f64>) -> Value {
    let odi = report.odi.passed();
    let bound = &report.bounds.report;
    let within_bound = match (bound.hypothesis_satisfied, bound.lifespan_bound, report.escape_time) {
        (true, Some(b), Some(t)) => Some(t <= b),
        _ => None,
    };
    let box_ok = doubling.map(|d| d <= BOX_DOUBLING_LIMIT);
    json!({
        "odi": odi,
        "within_lifespan_bound": within_bound,
        "box_doubling_max_relative": doubling,
        "box_doubling": box_ok,
        "passed": odi && within_bound != Some(false) && box_ok != Some(false),
    })
}

fn thresholds_json(report: &EuclidReport) -> Value {
    json!({
        "lambda_eff": report.bounds.thresholds,
        "lambda_psi": report.bounds.thresholds_lambda_psi,
        "weighted_ode": report.bounds.spec,
    })
}

pub fn run(file: &EuclidRunFile, opts: &RunOptions) -> Result<Outcome, CliError> {
    let spec = &file.euclid;
    spec.validate().map_err(config_err)?;
    let tf = build_test_function(spec.params.n)?;
    let pool = opts.pool()?;
    let (run, doubled): (Result<EuclidRun, _>, Option<Result<EuclidRun, _>>) = pool.install(|| {
        rayon::join(
            || run_euclid(spec, &tf),
            || {
                file.box_doubling.then(|| {
                    let mut wide = spec.clone();
                    wide.box_half_width *= 2.0;
                    run_euclid(&wide, &tf)
                })
            },
        )
    });
    let run = run?;
    let doubling = doubled.transpose()?.map(|d| max_relative_difference(&run.series, &d.series));
    let report = EuclidReport::new(&run, spec, &tf)?;
    let checks = checks(&report, doubling);
    let passed = checks["passed"] == json!(true);

    let out = OutDir::create(&opts.out)?;
    out.functionals(&run.series)?;
    out.json("thresholds.json", &thresholds_json(&report))?;
    let (gu, gv) = spec.params.rate_exponents();
    out.json(
        "plots.json",
        &manifest(
            vec![plot("weighted functionals", "functionals.csv", "t", &["U", "V"], false, true)],
            json!({ "U": -gu, "V": -gv }),
        ),
    )?;
    let mut value = report.to_json(&spec.params);
    value["initial"] = json!({ "U0": run.series.u[0], "V0": run.series.v[0] });
    value["final_time"] = json!(run.final_state.t);
    value["thresholds"] = thresholds_json(&report);
    value["checks"] = checks;
    out.report(value, "euclid-run")?;
    Ok(match run.status {
        RunStatus::Overflow => Outcome::Overflow,
        _ => Outcome::from_checks(passed),
    })
}
