//! Per-directory run manifest. Each command records one entry listing the
//! artifacts it wrote; rerunning a command in the same directory replaces its
//! entry, so every artifact is referenced exactly once.

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::config::Config;
use crate::error::{CliError, Result};
use crate::io::write_json;

pub const MANIFEST_FILE: &str = "manifest.json";
pub const TOOLKIT_VERSION: &str = concat!("tuner ", env!("CARGO_PKG_VERSION"));

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    /// Digest of command, method, seed and resolved config.
    pub run_id: String,
    pub command: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub method: Option<String>,
    pub seed: u64,
    /// Stage name to `(seed, stream id)`.
    pub streams: BTreeMap<String, (u64, u64)>,
    pub threads: usize,
    pub started: String,
    pub finished: String,
    /// Files read; relative to the manifest's directory when inside it,
    /// otherwise as given on the command line.
    pub inputs: Vec<String>,
    /// Files written, relative to the manifest's directory.
    pub artifacts: Vec<String>,
    pub config: Config,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub toolkit_version: String,
    pub runs: Vec<RunRecord>,
}

impl Manifest {
    pub fn load(dir: &Path) -> Result<Option<Manifest>> {
        let path = dir.join(MANIFEST_FILE);
        if !path.exists() {
            return Ok(None);
        }
        let text = std::fs::read_to_string(&path).map_err(|e| CliError::io(&path, e))?;
        serde_json::from_str(&text)
            .map(Some)
            .map_err(|e| CliError::Config(format!("{}: {e}", path.display())))
    }

    /// Adds `run` to the directory's manifest, dropping an earlier run of the
    /// same command and any earlier claim on the same artifacts.
    pub fn record(dir: &Path, run: RunRecord) -> Result<()> {
        let mut manifest = Manifest::load(dir)?.unwrap_or(Manifest {
            toolkit_version: TOOLKIT_VERSION.to_string(),
            runs: Vec::new(),
        });
        manifest.toolkit_version = TOOLKIT_VERSION.to_string();
        manifest.runs.retain(|r| r.command != run.command);
        for r in &mut manifest.runs {
            r.artifacts.retain(|a| !run.artifacts.contains(a));
        }
        manifest.runs.push(run);
        write_json(&dir.join(MANIFEST_FILE), &manifest)
    }

    pub fn latest(&self, command: &str) -> Option<&RunRecord> {
        self.runs.iter().rev().find(|r| r.command == command)
    }
}

pub fn run_id(command: &str, method: Option<&str>, seed: u64, config: &Config) -> String {
    let mut h = Sha256::new();
    h.update(command.as_bytes());
    h.update([0]);
    h.update(method.unwrap_or("").as_bytes());
    h.update([0]);
    h.update(seed.to_le_bytes());
    h.update(config.to_json().as_bytes());
    let digest = h.finalize();
    digest[..8].iter().map(|b| format!("{b:02x}")).collect()
}

/// `path` relative to `dir` when it lies inside it, else `path` as given.
pub fn input_path(dir: &Path, path: &Path) -> String {
    path.strip_prefix(dir).unwrap_or(path).display().to_string()
}

pub fn timestamp() -> String {
    chrono::Utc::now().to_rfc3339_opts(chrono::SecondsFormat::Millis, true)
}
