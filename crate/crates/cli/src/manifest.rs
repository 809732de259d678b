//! Run manifests: a JSON record written next to every output artifact.

use std::collections::BTreeMap;
use std::ffi::OsString;
use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::error::CliError;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub subcommand: String,
    /// Arguments after the program name, enough to replay the run.
    pub argv: Vec<String>,
    /// Fully resolved configuration.
    pub config: Value,
    pub inputs: BTreeMap<String, PathBuf>,
    pub outputs: BTreeMap<String, PathBuf>,
    pub seed: Option<u64>,
    pub version: String,
    pub duration_secs: f64,
    /// Facts about the outputs, e.g. corpus token totals.
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub stats: BTreeMap<String, Value>,
}

/// `<artifact>.manifest.json`.
pub fn manifest_path(artifact: &Path) -> PathBuf {
    let mut s = artifact.as_os_str().to_owned();
    s.push(".manifest.json");
    PathBuf::from(s)
}

impl RunManifest {
    pub fn read(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path).map_err(CliError::at(path))?;
        serde_json::from_str(&text).map_err(CliError::at(path))
    }

    pub fn write_next_to(&self, artifact: &Path) -> Result<(), CliError> {
        let path = manifest_path(artifact);
        let mut text = serde_json::to_string_pretty(self).expect("manifest serializes");
        text.push('\n');
        std::fs::write(&path, text).map_err(CliError::at(&path))
    }
}

/// Collects manifest fields while a subcommand runs.
pub struct Recorder {
    subcommand: &'static str,
    argv: Vec<String>,
    started: Instant,
    pub config: Value,
    pub inputs: BTreeMap<String, PathBuf>,
    pub outputs: BTreeMap<String, PathBuf>,
    pub seed: Option<u64>,
    pub stats: BTreeMap<String, Value>,
}

impl Recorder {
    pub fn new(subcommand: &'static str, argv: &[OsString]) -> Self {
        Recorder {
            subcommand,
            argv: argv.iter().skip(1).map(|a| a.to_string_lossy().into_owned()).collect(),
            started: Instant::now(),
            config: Value::Null,
            inputs: BTreeMap::new(),
            outputs: BTreeMap::new(),
            seed: None,
            stats: BTreeMap::new(),
        }
    }

    pub fn input(&mut self, name: &str, path: &Path) {
        self.inputs.insert(name.to_string(), path.to_path_buf());
    }

    pub fn output(&mut self, name: &str, path: &Path) {
        self.outputs.insert(name.to_string(), path.to_path_buf());
    }

    pub fn stat(&mut self, name: &str, value: impl Into<Value>) {
        self.stats.insert(name.to_string(), value.into());
    }

    /// Refuses to write over any input.
    pub fn check_outputs(&self) -> Result<(), CliError> {
        for out in self.outputs.values() {
            for (name, input) in &self.inputs {
                if same_file(out, input) {
                    return Err(CliError::Usage(format!(
                        "output {} would overwrite the {name} input",
                        out.display()
                    )));
                }
            }
        }
        Ok(())
    }

    /// Writes one manifest next to every recorded output.
    pub fn finish(self) -> Result<RunManifest, CliError> {
        let manifest = RunManifest {
            subcommand: self.subcommand.to_string(),
            argv: self.argv,
            config: self.config,
            inputs: self.inputs,
            outputs: self.outputs,
            seed: self.seed,
            version: env!("CARGO_PKG_VERSION").to_string(),
            duration_secs: self.started.elapsed().as_secs_f64(),
            stats: self.stats,
        };
        for out in manifest.outputs.values() {
            manifest.write_next_to(out)?;
        }
        Ok(manifest)
    }
}

fn same_file(a: &Path, b: &Path) -> bool {
    if a == b {
        return true;
    }
    match (a.canonicalize(), b.canonicalize()) {
        (Ok(a), Ok(b)) => a == b,
        _ => false,
    }
}
