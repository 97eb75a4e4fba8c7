//! Run manifests: one JSON file per command run recording every knob,
//! artifact, and summary metric, so a run can be audited and reproduced
//! from the manifest alone.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use anyhow::{Context, Result};
use serde::{Deserialize, Serialize};
use serde_json::Value;

/// Everything one command run did. Maps are sorted, struct fields are
/// serialized in declaration order, and floats use shortest round-trip
/// formatting, so two runs with identical flags and seed produce
/// byte-identical manifests except for `timestamp_s`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunManifest {
    /// Subcommand name.
    pub command: String,
    /// Scientific verdict; the exit code mirrors it (0 pass / 2 fail).
    pub pass: bool,
    /// Seconds since the Unix epoch at write time.
    pub timestamp_s: u64,
    /// Every knob that influenced the run, including derived ones such as
    /// the kernel bandwidth actually used.
    pub parameters: BTreeMap<String, Value>,
    /// Output file names, relative to the run's output directory.
    pub artifacts: BTreeMap<String, String>,
    /// Summary metrics: peak hits, correlations, eigenvalues.
    pub metrics: BTreeMap<String, Value>,
}

impl RunManifest {
    pub fn new(command: &str) -> Self {
        let timestamp_s = SystemTime::now()
            .duration_since(UNIX_EPOCH)
            .map(|d| d.as_secs())
            .unwrap_or(0);
        Self {
            command: command.to_string(),
            pass: false,
            timestamp_s,
            parameters: BTreeMap::new(),
            artifacts: BTreeMap::new(),
            metrics: BTreeMap::new(),
        }
    }

    pub fn param(&mut self, key: &str, value: impl Into<Value>) -> &mut Self {
        self.parameters.insert(key.to_string(), value.into());
        self
    }

    pub fn metric(&mut self, key: &str, value: impl Into<Value>) -> &mut Self {
        self.metrics.insert(key.to_string(), value.into());
        self
    }

    /// Records an artifact by its file name within the output directory.
    pub fn artifact(&mut self, key: &str, file_name: &str) -> &mut Self {
        self.artifacts
            .insert(key.to_string(), file_name.to_string());
        self
    }

    /// Writes `manifest.json` into `dir` and returns its path.
    pub fn write(&self, dir: &Path) -> Result<PathBuf> {
        fs::create_dir_all(dir)
            .with_context(|| format!("cannot create directory {}", dir.display()))?;
        let path = dir.join("manifest.json");
        let mut text = serde_json::to_string_pretty(self).context("cannot serialize manifest")?;
        text.push('\n');
        fs::write(&path, text).with_context(|| format!("cannot write {}", path.display()))?;
        Ok(path)
    }
}

/// A float as a JSON value (`null` for non-finite, which the pipelines
/// never produce on their output paths).
pub fn num(v: f64) -> Value {
    serde_json::Number::from_f64(v).map_or(Value::Null, Value::Number)
}

/// A float slice as a JSON array.
pub fn num_array(values: impl Iterator<Item = f64>) -> Value {
    Value::Array(values.map(num).collect())
}
