//! JSON run configuration and run manifests.
//!
//! A configuration is one JSON object: the mission parameters at the top
//! level plus a `field` object. A manifest written by a run has the same
//! shape with an extra `manifest` object, so it can be fed back to `run`.

use std::path::{Path, PathBuf};

use fieldmapper::{FieldSpec, MissionConfig};
use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};

/// Failure classes mapped to process exit codes.
#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("configuration error: {0}")]
    Config(String),
    #[error("runtime error: {0}")]
    Runtime(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 2,
            CliError::Runtime(_) => 1,
        }
    }
}

impl From<fieldmapper::Error> for CliError {
    fn from(e: fieldmapper::Error) -> Self {
        match e {
            fieldmapper::Error::Config { .. } | fieldmapper::Error::Table(_) => {
                CliError::Config(e.to_string())
            }
            other => CliError::Runtime(other.to_string()),
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Runtime(e.to_string())
    }
}

impl From<csv::Error> for CliError {
    fn from(e: csv::Error) -> Self {
        CliError::Runtime(e.to_string())
    }
}

#[derive(Debug, Clone)]
pub struct RunConfig {
    pub field: FieldSpec,
    pub mission: MissionConfig,
}

/// Provenance recorded next to a run's outputs.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ManifestInfo {
    pub tool_version: String,
    pub output_dir: PathBuf,
    pub wall_clock_seconds: f64,
}

#[derive(Debug, Clone)]
pub struct RunManifest {
    pub config: RunConfig,
    pub info: ManifestInfo,
}

impl RunManifest {
    pub fn to_json(&self) -> Result<String, CliError> {
        let mut obj = match serde_json::to_value(&self.config.mission) {
            Ok(Value::Object(m)) => m,
            _ => return Err(CliError::Runtime("cannot serialize mission".into())),
        };
        let field = serde_json::to_value(&self.config.field)
            .map_err(|e| CliError::Runtime(e.to_string()))?;
        let info =
            serde_json::to_value(&self.info).map_err(|e| CliError::Runtime(e.to_string()))?;
        obj.insert("field".into(), field);
        obj.insert("manifest".into(), info);
        serde_json::to_string_pretty(&Value::Object(obj))
            .map_err(|e| CliError::Runtime(e.to_string()))
    }
}

fn typed<T: serde::de::DeserializeOwned>(value: Value, prefix: &str) -> Result<T, CliError> {
    serde_path_to_error::deserialize(value).map_err(|err| {
        let path = err.path().to_string();
        let inner = err.into_inner().to_string();
        let mut location: Vec<String> = Vec::new();
        if !prefix.is_empty() {
            location.push(prefix.to_string());
        }
        if path != "." {
            location.push(path);
        }
        // serde reports a missing key against its parent; name the key itself.
        if let Some(name) = inner
            .strip_prefix("missing field `")
            .and_then(|s| s.split('`').next())
        {
            location.push(name.to_string());
        }
        let location = if location.is_empty() {
            "<root>".to_string()
        } else {
            location.join(".")
        };
        CliError::Config(format!("`{location}`: {inner}"))
    })
}

/// Parses a configuration (or manifest) document. Relative paths inside the
/// field spec resolve against `base_dir`.
pub fn parse_config(text: &str, base_dir: &Path) -> Result<RunConfig, CliError> {
    let value: Value =
        serde_json::from_str(text).map_err(|e| CliError::Config(format!("invalid JSON: {e}")))?;
    let Value::Object(mut obj) = value else {
        return Err(CliError::Config("configuration must be a JSON object".into()));
    };
    obj.remove("manifest");
    let field = match obj.remove("field") {
        Some(v) => typed::<FieldSpec>(v, "field")?,
        None => FieldSpec::reference_sinusoid(),
    };
    let mission: MissionConfig = typed(Value::Object(obj), "")?;
    let field = field.resolve(base_dir)?;
    mission.validate()?;
    Ok(RunConfig { field, mission })
}

pub fn load_config(path: &Path) -> Result<RunConfig, CliError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
    let base = path.parent().unwrap_or_else(|| Path::new("."));
    parse_config(&text, base)
}

/// The reference experiment: sinusoid field and default mission parameters.
pub fn reference_config_json() -> String {
    let mut obj: Map<String, Value> = match serde_json::to_value(MissionConfig::reference()) {
        Ok(Value::Object(m)) => m,
        _ => unreachable!("mission config serializes to an object"),
    };
    obj.insert(
        "field".into(),
        serde_json::to_value(FieldSpec::reference_sinusoid()).expect("field serializes"),
    );
    serde_json::to_string_pretty(&Value::Object(obj)).expect("config serializes")
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = r#"{
        "n_agents": 2, "n_trn": 5, "grid_side": 20,
        "kernel": {"alpha": 1.0, "beta": 0.1},
        "g_thresh": 1.0,
        "hough": {"r_min": 0.12, "r_max": 0.2, "sensitivity": 1.0}
    }"#;

    #[test]
    fn minimal_config_gets_defaults() {
        let cfg = parse_config(MINIMAL, Path::new(".")).unwrap();
        assert_eq!(cfg.mission.comm_radius, 0.2);
        assert_eq!(cfg.mission.jitter, 1e-8);
        assert!(cfg.mission.avoidance_enabled);
        assert_eq!(cfg.mission.margin, None);
    }

    #[test]
    fn missing_key_is_named_by_path() {
        let text = MINIMAL.replace("\"r_min\": 0.12, ", "");
        let err = parse_config(&text, Path::new(".")).unwrap_err();
        assert_eq!(err.exit_code(), 2);
        assert!(err.to_string().contains("hough.r_min"), "{err}");
        let text = MINIMAL.replace("\"n_trn\": 5, ", "");
        let err = parse_config(&text, Path::new(".")).unwrap_err();
        assert!(err.to_string().contains("`n_trn`"), "{err}");
    }

    #[test]
    fn bad_values_and_unknown_keys_are_config_errors() {
        let text = MINIMAL.replace("\"beta\": 0.1", "\"beta\": -0.1");
        let err = parse_config(&text, Path::new(".")).unwrap_err();
        assert!(err.to_string().contains("kernel.beta"), "{err}");
        let text = MINIMAL.replace("\"g_thresh\"", "\"g_threshold\"");
        assert_eq!(parse_config(&text, Path::new(".")).unwrap_err().exit_code(), 2);
        let text = MINIMAL.replace("\"kernel\": {", "\"field\": {\"kind\": \"nope\"}, \"kernel\": {");
        let err = parse_config(&text, Path::new(".")).unwrap_err();
        assert!(err.to_string().contains("field"), "{err}");
    }

    #[test]
    fn reference_config_parses() {
        let cfg = parse_config(&reference_config_json(), Path::new(".")).unwrap();
        assert_eq!(cfg.mission, MissionConfig::reference());
    }
}
