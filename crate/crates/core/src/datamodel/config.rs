//! Experiment configuration: the umbrella document the CLI consumes.
//!
//! Component-specific sections (model, attacks, detector, translators) are
//! kept as raw JSON and parsed by the module that owns them; this keeps the
//! datamodel free of upward dependencies. Every string under a key named
//! `path` anywhere in the document must point at an existing filesystem
//! entry at load time.

use super::DatasetFormat;
use crate::{Error, Result};
use serde::{Deserialize, Serialize};
use std::path::{Path, PathBuf};

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DatasetSpecConfig {
    pub format: DatasetFormat,
    pub path: PathBuf,
    #[serde(default)]
    pub tag: Option<String>,
    /// Optional deterministic subsample applied after loading.
    #[serde(default)]
    pub subsample: Option<usize>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ExperimentConfig {
    /// Schema version; bumped on breaking changes.
    pub version: u32,
    /// Master seed, fixed before any stochastic operation.
    pub seed: u64,
    pub dataset: DatasetSpecConfig,
    #[serde(default)]
    pub model: serde_json::Value,
    #[serde(default)]
    pub attacks: Vec<serde_json::Value>,
    #[serde(default)]
    pub detector: serde_json::Value,
    #[serde(default)]
    pub translators: Vec<serde_json::Value>,
    pub out_dir: PathBuf,
}

pub const CONFIG_VERSION: u32 = 1;

impl ExperimentConfig {
    /// Parse from a JSON file and validate referenced paths.
    pub fn load(path: &Path) -> Result<(Self, String)> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let cfg: ExperimentConfig = serde_json::from_str(&text)?;
        cfg.validate()?;
        Ok((cfg, text))
    }

    pub fn validate(&self) -> Result<()> {
        if self.version != CONFIG_VERSION {
            return Err(Error::validation(format!(
                "config version {} unsupported (expected {CONFIG_VERSION})",
                self.version
            )));
        }
        if !self.dataset.path.exists() {
            return Err(Error::validation(format!(
                "dataset path {} does not exist",
                self.dataset.path.display()
            )));
        }
        let doc = serde_json::to_value(self)?;
        let mut missing = Vec::new();
        collect_missing_paths(&doc, &mut missing);
        if !missing.is_empty() {
            return Err(Error::validation(format!(
                "config references missing paths: {}",
                missing.join(", ")
            )));
        }
        Ok(())
    }
}

fn collect_missing_paths(value: &serde_json::Value, missing: &mut Vec<String>) {
    match value {
        serde_json::Value::Object(map) => {
            for (k, v) in map {
                if k == "path" {
                    if let serde_json::Value::String(s) = v {
                        if !Path::new(s).exists() {
                            missing.push(s.clone());
                        }
                    }
                }
                collect_missing_paths(v, missing);
            }
        }
        serde_json::Value::Array(items) => {
            for v in items {
                collect_missing_paths(v, missing);
            }
        }
        _ => {}
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn load_validates_paths() {
        let dir = tempfile::tempdir().unwrap();
        let data_dir = dir.path().join("data");
        std::fs::create_dir(&data_dir).unwrap();
        let cfg_path = dir.path().join("cfg.json");
        let good = serde_json::json!({
            "version": 1,
            "seed": 7,
            "dataset": {"format": "image_folder", "path": data_dir},
            "out_dir": dir.path().join("out"),
        });
        std::fs::write(&cfg_path, serde_json::to_vec(&good).unwrap()).unwrap();
        let (cfg, text) = ExperimentConfig::load(&cfg_path).unwrap();
        assert_eq!(cfg.seed, 7);
        assert!(text.contains("\"seed\""));

        let bad = serde_json::json!({
            "version": 1,
            "seed": 7,
            "dataset": {"format": "image_folder", "path": dir.path().join("nope")},
            "out_dir": dir.path().join("out"),
        });
        std::fs::write(&cfg_path, serde_json::to_vec(&bad).unwrap()).unwrap();
        assert!(ExperimentConfig::load(&cfg_path).is_err());
    }
}
