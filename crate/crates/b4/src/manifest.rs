//! Run manifests: config echo, timestamps, output checksums, recorded
//! errors. Written atomically (temp file + rename) at run end.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::DataError;

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunManifest {
    pub command: String,
    pub seed: u64,
    pub started: String,
    pub finished: String,
    pub config: serde_json::Value,
    /// Output file name → SHA-256 of its contents.
    pub outputs: BTreeMap<String, String>,
    /// Free-form results: metrics, batch counts, best grid row, …
    pub notes: BTreeMap<String, serde_json::Value>,
    pub errors: Vec<String>,
}

pub fn sha256_file(path: &Path) -> Result<String, DataError> {
    let bytes = std::fs::read(path).map_err(|e| DataError::Io {
        path: path.display().to_string(),
        source: e,
    })?;
    Ok(format!("{:x}", Sha256::digest(&bytes)))
}

impl RunManifest {
    pub fn new(command: &str, seed: u64, config: serde_json::Value) -> Self {
        RunManifest {
            command: command.to_string(),
            seed,
            started: chrono::Utc::now().to_rfc3339(),
            finished: String::new(),
            config,
            outputs: BTreeMap::new(),
            notes: BTreeMap::new(),
            errors: Vec::new(),
        }
    }

    /// Checksum `path` and record it under its name relative to `base`.
    pub fn record_file(&mut self, path: &Path, base: &Path) -> Result<(), DataError> {
        let name = path
            .strip_prefix(base)
            .unwrap_or(path)
            .display()
            .to_string();
        self.outputs.insert(name, sha256_file(path)?);
        Ok(())
    }

    pub fn note<T: Serialize>(&mut self, key: &str, value: &T) {
        if let Ok(v) = serde_json::to_value(value) {
            self.notes.insert(key.to_string(), v);
        }
    }

    pub fn record_error(&mut self, message: String) {
        self.errors.push(message);
    }

    pub fn is_clean(&self) -> bool {
        self.errors.is_empty()
    }

    /// Stamp the end time and write `manifest.json` atomically into
    /// `dir`.
    pub fn write(&mut self, dir: &Path) -> Result<PathBuf, DataError> {
        self.finished = chrono::Utc::now().to_rfc3339();
        std::fs::create_dir_all(dir).map_err(|e| DataError::Io {
            path: dir.display().to_string(),
            source: e,
        })?;
        let target = dir.join("manifest.json");
        let tmp = dir.join(".manifest.json.tmp");
        let body = serde_json::to_string_pretty(self)
            .map_err(|e| DataError::Invalid(format!("manifest serialization: {e}")))?;
        std::fs::write(&tmp, body).map_err(|e| DataError::Io {
            path: tmp.display().to_string(),
            source: e,
        })?;
        std::fs::rename(&tmp, &target).map_err(|e| DataError::Io {
            path: target.display().to_string(),
            source: e,
        })?;
        Ok(target)
    }
}
