//! Run manifests: everything needed to re-execute a run, plus the hash of
//! every file it produced.

use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::config::{ExperimentConfig, Mode};
use crate::error::{io_err, HarnessError, Result};
use crate::formats::OutputDir;
use crate::pipelines::RunOptions;

pub const MANIFEST_FILE: &str = "manifest.json";
pub const MANIFEST_SCHEMA: &str = "torus-sir manifest v1";

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct OutputRecord {
    pub path: String,
    pub sha256: String,
    pub bytes: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub schema: String,
    pub tool: String,
    pub tool_version: String,
    pub core_version: String,
    pub command: Mode,
    pub options: RunOptions,
    pub seed: u64,
    /// Hash of the canonical JSON form of `config`.
    pub config_sha256: String,
    pub config: ExperimentConfig,
    pub outputs: Vec<OutputRecord>,
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    format!("{:x}", Sha256::digest(bytes))
}

pub fn config_hash(config: &ExperimentConfig) -> String {
    sha256_hex(config.to_json().as_bytes())
}

pub fn hash_outputs(out: &OutputDir) -> Result<Vec<OutputRecord>> {
    let mut names: Vec<&String> = out.written().iter().collect();
    names.sort();
    names
        .into_iter()
        .map(|name| {
            let path = out.root().join(name);
            let bytes = std::fs::read(&path).map_err(io_err(&path))?;
            Ok(OutputRecord { path: name.clone(), sha256: sha256_hex(&bytes), bytes: bytes.len() as u64 })
        })
        .collect()
}

impl Manifest {
    pub fn build(command: Mode, options: &RunOptions, config: &ExperimentConfig, out: &OutputDir) -> Result<Self> {
        Ok(Self {
            schema: MANIFEST_SCHEMA.into(),
            tool: env!("CARGO_PKG_NAME").into(),
            tool_version: env!("CARGO_PKG_VERSION").into(),
            core_version: torus_sir_core::VERSION.into(),
            command,
            options: options.clone(),
            seed: config.seed,
            config_sha256: config_hash(config),
            config: config.clone(),
            outputs: hash_outputs(out)?,
        })
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| HarnessError::Config(format!("cannot read manifest {}: {e}", path.display())))?;
        let manifest: Manifest = serde_json::from_str(&text)
            .map_err(|e| HarnessError::Config(format!("malformed manifest {}: {e}", path.display())))?;
        if manifest.schema != MANIFEST_SCHEMA {
            return Err(HarnessError::Config(format!("unsupported manifest schema `{}`", manifest.schema)));
        }
        if config_hash(&manifest.config) != manifest.config_sha256 {
            return Err(HarnessError::Config("manifest config does not match its recorded hash".into()));
        }
        Ok(manifest)
    }
}

/// Differences between recorded and reproduced outputs.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ReplayReport {
    pub identical: bool,
    pub compared: usize,
    pub mismatched: Vec<String>,
    pub missing: Vec<String>,
    pub extra: Vec<String>,
}

pub fn compare(recorded: &[OutputRecord], reproduced: &[OutputRecord]) -> ReplayReport {
    let mut mismatched = Vec::new();
    let mut missing = Vec::new();
    for r in recorded {
        match reproduced.iter().find(|o| o.path == r.path) {
            Some(o) if o == r => {}
            Some(_) => mismatched.push(r.path.clone()),
            None => missing.push(r.path.clone()),
        }
    }
    let extra: Vec<String> =
        reproduced.iter().filter(|o| !recorded.iter().any(|r| r.path == o.path)).map(|o| o.path.clone()).collect();
    ReplayReport {
        identical: mismatched.is_empty() && missing.is_empty() && extra.is_empty(),
        compared: recorded.len(),
        mismatched,
        missing,
        extra,
    }
}
