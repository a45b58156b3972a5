use std::path::{Path, PathBuf};

use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::config::RunConfig;
use crate::CliError;

#[derive(Debug, Serialize)]
pub struct FileEntry {
    /// Path relative to the output directory.
    pub path: String,
    pub bytes: u64,
    pub sha256: String,
}

#[derive(Debug, Serialize)]
pub struct Manifest<'a> {
    pub command: &'a str,
    pub version: &'a str,
    pub seed: u64,
    pub config: &'a RunConfig,
    pub files: Vec<FileEntry>,
    #[serde(skip_serializing_if = "serde_json::Value::is_null")]
    pub extra: serde_json::Value,
}

pub fn sha256_file(path: &Path) -> Result<(u64, String), CliError> {
    let bytes = std::fs::read(path).map_err(|e| CliError::io(path, e))?;
    Ok((bytes.len() as u64, hex::encode(Sha256::digest(&bytes))))
}

/// Hashes `files` (relative to `dir`) and writes `dir/manifest.json`.
pub fn write_manifest(
    dir: &Path,
    command: &str,
    config: &RunConfig,
    files: &[PathBuf],
    extra: serde_json::Value,
) -> Result<PathBuf, CliError> {
    let mut entries = Vec::with_capacity(files.len());
    for f in files {
        let (bytes, sha256) = sha256_file(&dir.join(f))?;
        entries.push(FileEntry { path: f.to_string_lossy().into_owned(), bytes, sha256 });
    }
    let m = Manifest { command, version: env!("CARGO_PKG_VERSION"), seed: config.seed, config, files: entries, extra };
    let path = dir.join("manifest.json");
    let text = serde_json::to_string_pretty(&m).map_err(|e| CliError::Config(e.to_string()))?;
    std::fs::write(&path, text + "\n").map_err(|e| CliError::io(&path, e))?;
    Ok(path)
}
