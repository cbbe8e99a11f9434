use std::fs::File;
use std::io::BufWriter;
use std::path::{Path, PathBuf};

use blowup_core::io::{to_json_string, write_csv_rows};
use blowup_core::system::FunctionalSeries;
use serde::Serialize;
use serde_json::{json, Value};

use crate::CliError;

/// Output directory; created on first use so config errors leave no trace.
pub struct OutDir {
    path: PathBuf,
}

impl OutDir {
    pub fn create(path: &Path) -> Result<Self, CliError> {
        std::fs::create_dir_all(path)?;
        Ok(Self { path: path.to_path_buf() })
    }

    pub fn path(&self) -> &Path {
        &self.path
    }

    pub fn json<T: Serialize + ?Sized>(&self, name: &str, value: &T) -> Result<(), CliError> {
        let text = to_json_string(value).map_err(|e| CliError::Runtime(e.to_string()))?;
        std::fs::write(self.path.join(name), text)?;
        Ok(())
    }

    /// `report.json` with a `build_info` stanza appended.
    pub fn report(&self, mut report: Value, command: &str) -> Result<(), CliError> {
        if let Value::Object(map) = &mut report {
            map.insert("build_info".into(), build_info(command));
        }
        self.json("report.json", &report)
    }

    pub fn csv(&self, name: &str, header: &[&str], rows: impl IntoIterator<Item = Vec<f64>>) -> Result<(), CliError> {
        let file = BufWriter::new(File::create(self.path.join(name))?);
        write_csv_rows(file, header, rows)?;
        Ok(())
    }

    pub fn functionals(&self, series: &FunctionalSeries) -> Result<(), CliError> {
        let file = BufWriter::new(File::create(self.path.join("functionals.csv"))?);
        series.write_csv(file)?;
        Ok(())
    }
}

pub fn build_info(command: &str) -> Value {
    json!({
        "tool": env!("CARGO_PKG_NAME"),
        "version": env!("CARGO_PKG_VERSION"),
        "command": command,
        "schema_version": crate::config::SCHEMA_VERSION,
    })
}

/// One entry of `plots.json`: columns of a CSV file to draw against each other.
pub fn plot(title: &str, file: &str, x: &str, ys: &[&str], log_x: bool, log_y: bool) -> Value {
    json!({ "title": title, "file": file, "x": x, "y": ys, "log_x": log_x, "log_y": log_y })
}

pub fn manifest(plots: Vec<Value>, reference_slopes: Value) -> Value {
    json!({ "plots": plots, "reference_slopes": reference_slopes })
}
