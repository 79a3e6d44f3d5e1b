//! Run manifests written next to every output.

use std::path::Path;

use pdi_core::solver::SolverOptions;
use pdi_core::{Error, Result};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::io;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NoiseRecord {
    pub delta: f64,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GlsmRecord {
    pub alpha_rule: String,
    pub alpha0: f64,
    pub q: i64,
    pub sampling_res: f64,
    pub extent: [[f64; 2]; 2],
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FileEntry {
    pub path: String,
    pub sha256: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub tool_version: String,
    pub command: String,
    pub config_path: String,
    pub config_sha256: String,
    pub solver: SolverOptions,
    pub noise: NoiseRecord,
    pub glsm: GlsmRecord,
    pub out_dir: String,
    pub inputs: Vec<FileEntry>,
    pub outputs: Vec<FileEntry>,
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

/// Hash of the file at `path`, recorded under the name `label`.
pub fn file_entry(path: &Path, label: &Path) -> Result<FileEntry> {
    Ok(FileEntry {
        path: label.display().to_string(),
        sha256: sha256_hex(&io::read_bytes(path)?),
    })
}

impl RunManifest {
    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("manifest serializes")
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        io::write_atomic(path, self.to_toml().as_bytes())
    }

    pub fn read(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path.display().to_string(), e))?;
        toml::from_str(&text).map_err(|e| Error::format(path.display().to_string(), e.to_string()))
    }
}
