use blowup_core::torus::{run_torus, RunStatus, TorusReport, TorusRun, TorusRunConfig};
use serde::Deserialize;
use serde_json::{json, Value};

use crate::config::{config_err, Versioned};
use crate::output::{manifest, plot, OutDir};
use crate::{CliError, Outcome, RunOptions};

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TorusRunFile {
    pub schema_version: u32,
    pub torus: TorusRunConfig,
    /// Also write the final fields as `final_state.bin` + `final_state.json`.
    #[serde(default)]
    pub snapshot: bool,
}

impl Versioned for TorusRunFile {
    fn schema_version(&self) -> u32 {
        self.schema_version
    }
}

/// Per-step zero-mode tolerance for the Laplacian contribution.
pub const ZERO_MODE_LIMIT: f64 = 1e-12;

/// Pass/fail checks of a finished run.
pub fn checks(run: &TorusRun, report: &TorusReport) -> Value {
    let odi = report.odi.passed();
    let zero_mode = run.max_zero_mode_laplacian < ZERO_MODE_LIMIT;
    let bound = &report.bounds.report;
    let within_bound = match (bound.hypothesis_satisfied, bound.lifespan_bound, report.blowup_estimate) {
        (true, Some(b), Some(t)) => Some(t <= b),
        // no blow-up observed before the bound although it should have happened
        (true, Some(b), None) => Some(run.final_state.t < b),
        _ => None,
    };
    json!({
        "odi": odi,
        "zero_mode": zero_mode,
        "within_lifespan_bound": within_bound,
        "passed": odi && zero_mode && within_bound != Some(false),
    })
}

pub fn run(file: &TorusRunFile, opts: &RunOptions) -> Result<Outcome, CliError> {
    file.torus.validate().map_err(config_err)?;
    let params = file.torus.params;
    let run = run_torus(&file.torus)?;
    let report = TorusReport::new(&run, &params)?;
    let checks = checks(&run, &report);
    let passed = checks["passed"] == json!(true);

    let out = OutDir::create(&opts.out)?;
    out.functionals(&run.series)?;
    if file.snapshot {
        run.final_state.write_snapshot(out.path(), "final_state")?;
    }
    let (gu, gv) = params.rate_exponents();
    out.json(
        "plots.json",
        &manifest(
            vec![plot("weighted functionals", "functionals.csv", "t", &["U", "V"], false, true)],
            json!({ "U": -gu, "V": -gv }),
        ),
    )?;
    let mut value = report.to_json(&params);
    value["initial"] = json!({ "U0": run.series.u[0], "V0": run.series.v[0] });
    value["final_time"] = json!(run.final_state.t);
    value["checks"] = checks;
    out.report(value, "torus-run")?;
    Ok(match run.status {
        RunStatus::Overflow => Outcome::Overflow,
        _ => Outcome::from_checks(passed),
    })
}
