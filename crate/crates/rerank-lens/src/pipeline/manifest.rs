//! Run manifests: enough provenance to reproduce a run.

use std::collections::BTreeMap;
use std::fs;
use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::PipelineError;

/// Provenance of one pipeline run: the exact config, content digests of
/// every input file, the seed and derived per-stage seeds, and wall-clock
/// timestamps. Written beside the artifacts as `manifest.json`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunManifest {
    pub tool_version: String,
    pub command_line: String,
    pub seed: u64,
    pub config: toml::Value,
    /// Input path -> `sha256:<hex>` content digest.
    pub input_digests: BTreeMap<String, String>,
    pub stage_seeds: BTreeMap<String, u64>,
    pub started_at: String,
    pub finished_at: String,
}

impl RunManifest {
    pub fn write_json(&self, path: &Path) -> Result<(), PipelineError> {
        let mut body = serde_json::to_string_pretty(self).expect("manifest serialization");
        body.push('\n');
        write_atomic(path, body.as_bytes())
    }
}

/// `sha256:<hex>` digest of a file's contents.
pub fn file_digest(path: &Path) -> Result<String, PipelineError> {
    let bytes = fs::read(path).map_err(|source| PipelineError::Io {
        path: path.display().to_string(),
        source,
    })?;
    Ok(format!("sha256:{:x}", Sha256::digest(&bytes)))
}

/// Derives a per-stage seed from the global seed: one knob in the config,
/// independent randomness per stage.
pub fn stage_seed(seed: u64, stage: &str) -> u64 {
    let mut hasher = Sha256::new();
    hasher.update(seed.to_le_bytes());
    hasher.update(stage.as_bytes());
    let digest = hasher.finalize();
    u64::from_le_bytes(digest[..8].try_into().expect("8 bytes"))
}

/// Writes via a `.partial` sibling and renames into place, so completed
/// outputs are never overwritten by a failing write.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<(), PipelineError> {
    let partial = partial_path(path);
    let io = |source: std::io::Error| PipelineError::Io {
        path: path.display().to_string(),
        source,
    };
    let mut file = fs::File::create(&partial).map_err(io)?;
    file.write_all(bytes).map_err(io)?;
    file.sync_all().map_err(io)?;
    drop(file);
    fs::rename(&partial, path).map_err(io)
}

pub fn partial_path(path: &Path) -> std::path::PathBuf {
    let mut name = path.file_name().unwrap_or_default().to_os_string();
    name.push(".partial");
    path.with_file_name(name)
}
