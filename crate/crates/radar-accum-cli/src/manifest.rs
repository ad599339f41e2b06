//! Run manifests: the resolved command next to its outputs.
//!
//! A manifest records exactly what produced a directory or file, including
//! the fully resolved scenario for `simulate`. Replaying it re-executes the
//! recorded command; because the manifest itself stores the original
//! destination rather than any replay override, a replayed tree is byte
//! identical to the first run, manifest included.

use std::path::Path;

use serde::{Deserialize, Serialize};

use radar_accum::synth::ScenarioConfig;

use crate::{CliError, Command};

pub const MANIFEST_NAME: &str = "manifest.json";

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunManifest {
    /// Name and version of the tool that wrote this file.
    pub artifact: String,
    pub version: String,
    /// The resolved invocation, replayable via `rerun`.
    pub command: Command,
    /// Fully resolved scenario for simulate runs, so a replay does not
    /// depend on the builtin catalog staying unchanged.
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub scenario: Option<ScenarioConfig>,
}

impl RunManifest {
    pub fn new(command: Command) -> Self {
        RunManifest {
            artifact: env!("CARGO_PKG_NAME").to_string(),
            version: env!("CARGO_PKG_VERSION").to_string(),
            command,
            scenario: None,
        }
    }

    pub fn with_scenario(command: Command, scenario: ScenarioConfig) -> Self {
        RunManifest { scenario: Some(scenario), ..RunManifest::new(command) }
    }

    /// Writes the manifest into `dir` as `manifest.json`.
    pub fn write_in_dir(&self, dir: &Path) -> Result<(), CliError> {
        self.write_to(&dir.join(MANIFEST_NAME))
    }

    /// Writes the manifest next to a file output as `<file>.manifest.json`.
    pub fn write_beside(&self, file: &Path) -> Result<(), CliError> {
        let mut name = file.as_os_str().to_owned();
        name.push(".manifest.json");
        self.write_to(Path::new(&name))
    }

    fn write_to(&self, path: &Path) -> Result<(), CliError> {
        let mut text = serde_json::to_string_pretty(self)
            .map_err(|e| CliError::Json { path: path.to_path_buf(), detail: e.to_string() })?;
        text.push('\n');
        std::fs::write(path, text).map_err(|e| CliError::file(path, e))
    }

    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::file(path, e))?;
        serde_json::from_str(&text)
            .map_err(|e| CliError::Json { path: path.to_path_buf(), detail: e.to_string() })
    }
}
