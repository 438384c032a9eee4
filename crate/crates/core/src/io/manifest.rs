//! Run manifests, written next to every output as `<output>.manifest.json`.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::{sha256_file, IoError};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunManifest {
    pub tool: String,
    pub version: String,
    pub command: String,
    /// Command-line arguments after the program name.
    pub args: Vec<String>,
    /// Directory the command ran in; relative paths resolve against it.
    pub working_dir: String,
    /// Fully resolved configuration of the run.
    pub config: serde_json::Value,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    /// Integration time of a written timestamp stream.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub duration_ps: Option<u64>,
    /// SHA-256 per input path.
    pub inputs: BTreeMap<String, String>,
    /// SHA-256 per output path.
    pub outputs: BTreeMap<String, String>,
    pub wall_clock_s: f64,
}

pub fn manifest_path(output: &Path) -> PathBuf {
    let mut s = output.as_os_str().to_owned();
    s.push(".manifest.json");
    PathBuf::from(s)
}

impl RunManifest {
    pub fn new(command: &str, args: Vec<String>) -> Self {
        RunManifest {
            tool: env!("CARGO_PKG_NAME").to_string(),
            version: env!("CARGO_PKG_VERSION").to_string(),
            command: command.to_string(),
            args,
            working_dir: String::new(),
            config: serde_json::Value::Null,
            seed: None,
            duration_ps: None,
            inputs: BTreeMap::new(),
            outputs: BTreeMap::new(),
            wall_clock_s: 0.0,
        }
    }

    pub fn add_input(&mut self, path: &Path) -> Result<(), IoError> {
        self.inputs.insert(path.display().to_string(), sha256_file(path)?);
        Ok(())
    }

    pub fn add_output(&mut self, path: &Path) -> Result<(), IoError> {
        self.outputs.insert(path.display().to_string(), sha256_file(path)?);
        Ok(())
    }

    pub fn write(&self, path: &Path) -> Result<(), IoError> {
        let mut text = serde_json::to_string_pretty(self).map_err(|e| IoError::Config(e.to_string()))?;
        text.push('\n');
        std::fs::write(path, text)?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self, IoError> {
        let text = std::fs::read_to_string(path)?;
        serde_json::from_str(&text).map_err(|e| IoError::Config(format!("{}: {e}", path.display())))
    }
}
