//! Run manifests: the resolved config, its hash, the seed, and a digest of
//! every file the command wrote. No timestamps, so reruns compare equal.

use std::collections::BTreeMap;
use std::path::Path;

use mltm_core::{Error, Result};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::config::RunConfig;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub command: String,
    pub seed: u64,
    pub config_sha256: String,
    pub config: RunConfig,
    /// File name (relative to the output directory) to SHA-256.
    pub outputs: BTreeMap<String, String>,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub notes: BTreeMap<String, String>,
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

impl Manifest {
    pub fn new(command: &str, config: &RunConfig) -> Self {
        Self {
            command: command.into(),
            seed: config.seed,
            config_sha256: sha256_hex(config.to_toml().as_bytes()),
            config: config.clone(),
            outputs: BTreeMap::new(),
            notes: BTreeMap::new(),
        }
    }

    /// Records the digest of `dir/name`, which must already be written.
    pub fn add_output(&mut self, dir: &Path, name: &str) -> Result<()> {
        let path = dir.join(name);
        let bytes = std::fs::read(&path).map_err(|e| Error::io(&path, e))?;
        self.outputs.insert(name.into(), sha256_hex(&bytes));
        Ok(())
    }

    /// Writes `dir/name`. Commands that share an output directory use
    /// different names so they do not overwrite each other.
    pub fn write(&self, dir: &Path, name: &str) -> Result<()> {
        let path = dir.join(name);
        let text = serde_json::to_string_pretty(self)? + "\n";
        std::fs::write(&path, text).map_err(|e| Error::io(&path, e))
    }

    pub fn read(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Ok(serde_json::from_str(&text)?)
    }
}
