use std::path::Path;

use serde::de::DeserializeOwned;

use crate::CliError;

pub const SCHEMA_VERSION: u32 = 1;

/// Configs carry a top-level `schema_version`.
pub trait Versioned {
    fn schema_version(&self) -> u32;
}

/// Reads and parses a config; `None` falls back to `default_json`.
pub fn load<T: DeserializeOwned + Versioned>(path: Option<&Path>, default_json: Option<&str>) -> Result<T, CliError> {
    let text = match (path, default_json) {
        (Some(p), _) => std::fs::read_to_string(p).map_err(|e| CliError::Config(format!("{}: {e}", p.display())))?,
        (None, Some(d)) => d.to_string(),
        (None, None) => return Err(CliError::Config("--config is required for this subcommand".into())),
    };
    parse(&text)
}

pub fn parse<T: DeserializeOwned + Versioned>(text: &str) -> Result<T, CliError> {
    let value: T = serde_json::from_str(text).map_err(|e| CliError::Config(e.to_string()))?;
    if value.schema_version() != SCHEMA_VERSION {
        return Err(CliError::Config(format!(
            "unsupported schema_version {} (expected {SCHEMA_VERSION})",
            value.schema_version()
        )));
    }
    Ok(value)
}

pub(crate) fn config_err(e: impl std::fmt::Display) -> CliError {
    CliError::Config(e.to_string())
}
