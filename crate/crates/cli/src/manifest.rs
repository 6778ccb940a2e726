//! Run manifests: written before any other output, with a content hash that
//! is stable across runs on identical inputs.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{CliError, Result};

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunManifest {
    pub command: String,
    pub config: serde_json::Value,
    pub seed: Option<u64>,
    pub input_hash: String,
    pub outputs: Vec<PathBuf>,
}

/// Hex SHA-256 over the command name, the resolved config, and the raw bytes
/// of every input file, in order.
pub fn content_hash(command: &str, config: &serde_json::Value, input_files: &[&Path]) -> Result<String> {
    let mut hasher = Sha256::new();
    hasher.update(command.as_bytes());
    hasher.update(
        serde_json::to_vec(config).map_err(|e| CliError::Internal(e.to_string()))?,
    );
    for path in input_files {
        let bytes = std::fs::read(path)
            .map_err(|e| CliError::Usage(format!("cannot read {}: {e}", path.display())))?;
        hasher.update(&bytes);
    }
    let digest = hasher.finalize();
    Ok(digest.iter().map(|b| format!("{b:02x}")).collect())
}

impl RunManifest {
    pub fn write(&self, path: &Path) -> Result<()> {
        let body = serde_json::to_string_pretty(self)
            .map_err(|e| CliError::Internal(e.to_string()))?;
        std::fs::write(path, body)
            .map_err(|e| CliError::Usage(format!("cannot write {}: {e}", path.display())))?;
        Ok(())
    }
}
