//! Run manifests: one JSON file per invocation recording the resolved
//! configuration, the content hashes of every input read, the files written,
//! and the wall time. Two runs with the same config and inputs differ only
//! in `wall_time_ms`.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::error::CliError;

#[derive(Debug, Serialize)]
pub struct RunManifest {
    /// Toolkit version that produced this run.
    pub version: String,
    /// Subcommand name as typed on the command line.
    pub command: String,
    /// Fully resolved flag values.
    pub config: serde_json::Value,
    /// Seed driving the run, when the subcommand is seeded.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    pub wall_time_ms: u128,
    /// Input path → SHA-256 of its bytes.
    pub inputs: BTreeMap<String, String>,
    /// Files the run wrote, the manifest itself excluded.
    pub outputs: Vec<String>,
}

/// Collects inputs and outputs while a subcommand runs, then writes the
/// manifest next to the primary output.
pub struct ManifestBuilder {
    command: String,
    config: serde_json::Value,
    seed: Option<u64>,
    started: Instant,
    inputs: BTreeMap<String, String>,
    outputs: Vec<String>,
}

impl ManifestBuilder {
    pub fn new<C: Serialize>(command: &str, config: &C) -> Result<Self, CliError> {
        let config = serde_json::to_value(config)
            .map_err(|e| CliError::Runtime(format!("cannot serialize the run config: {e}")))?;
        Ok(ManifestBuilder {
            command: command.to_string(),
            config,
            seed: None,
            started: Instant::now(),
            inputs: BTreeMap::new(),
            outputs: Vec::new(),
        })
    }

    pub fn seed(&mut self, seed: u64) -> &mut Self {
        self.seed = Some(seed);
        self
    }

    /// Record an input file by content hash; call after the file was read
    /// successfully so hash failures cannot mask a clearer earlier error.
    pub fn input(&mut self, path: &Path) -> Result<&mut Self, CliError> {
        self.inputs
            .insert(path.display().to_string(), sha256_hex(path)?);
        Ok(self)
    }

    pub fn output(&mut self, path: &Path) -> &mut Self {
        self.outputs.push(path.display().to_string());
        self
    }

    /// Write the manifest to `explicit`, or `<primary output>.manifest.json`.
    pub fn write(self, explicit: Option<&Path>) -> Result<(), CliError> {
        let path = match (explicit, self.outputs.first()) {
            (Some(path), _) => path.to_path_buf(),
            (None, Some(primary)) => default_manifest_path(Path::new(primary)),
            (None, None) => return Ok(()), // stdout-only run, nothing to anchor to
        };
        let manifest = RunManifest {
            version: env!("CARGO_PKG_VERSION").to_string(),
            command: self.command,
            config: self.config,
            seed: self.seed,
            wall_time_ms: self.started.elapsed().as_millis(),
            inputs: self.inputs,
            outputs: self.outputs,
        };
        let body = serde_json::to_string_pretty(&manifest)
            .map_err(|e| CliError::Runtime(format!("cannot serialize the manifest: {e}")))?;
        std::fs::write(&path, body + "\n")
            .map_err(|e| CliError::Runtime(format!("cannot write {}: {e}", path.display())))
    }
}

/// `out.jsonl` → `out.jsonl.manifest.json`.
pub fn default_manifest_path(primary: &Path) -> PathBuf {
    let mut name = primary.as_os_str().to_os_string();
    name.push(".manifest.json");
    PathBuf::from(name)
}

pub fn sha256_hex(path: &Path) -> Result<String, CliError> {
    let bytes = std::fs::read(path)
        .map_err(|e| CliError::Runtime(format!("cannot hash {}: {e}", path.display())))?;
    let digest = Sha256::digest(&bytes);
    Ok(digest.iter().map(|b| format!("{b:02x}")).collect())
}
