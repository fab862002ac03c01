//! Content-addressed cache of reference solutions.

use std::path::{Path, PathBuf};

use log::info;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::HarnessError;

pub const CACHE_ENV: &str = "GRPDAL_CACHE_DIR";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CachedReference {
    /// The text that was hashed into the file name.
    pub key_material: String,
    pub objective: f64,
    pub x: Vec<f64>,
    pub y: Vec<f64>,
    pub kkt_residual: f64,
    pub iterations: usize,
}

/// `$GRPDAL_CACHE_DIR`, else `<output>/cache`.
pub fn cache_dir(output: &Path) -> PathBuf {
    match std::env::var_os(CACHE_ENV) {
        Some(dir) if !dir.is_empty() => PathBuf::from(dir),
        _ => output.join("cache"),
    }
}

pub fn cache_key(material: &str) -> String {
    hex::encode(Sha256::digest(material.as_bytes()))
}

pub struct ReferenceCache {
    dir: PathBuf,
}

impl ReferenceCache {
    pub fn new(dir: PathBuf) -> Self {
        ReferenceCache { dir }
    }

    pub fn path_for(&self, material: &str) -> PathBuf {
        self.dir.join(format!("{}.json", cache_key(material)))
    }

    /// A stored entry whose key material matches exactly, if any.
    pub fn load(&self, material: &str) -> Result<Option<CachedReference>, HarnessError> {
        let path = self.path_for(material);
        let text = match std::fs::read_to_string(&path) {
            Ok(t) => t,
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => return Ok(None),
            Err(e) => return Err(HarnessError::io(&path, e)),
        };
        let entry: CachedReference = serde_json::from_str(&text)?;
        if entry.key_material != material {
            return Ok(None);
        }
        info!("reference cache hit: {}", path.display());
        Ok(Some(entry))
    }

    pub fn store(&self, entry: &CachedReference) -> Result<PathBuf, HarnessError> {
        std::fs::create_dir_all(&self.dir).map_err(|e| HarnessError::io(&self.dir, e))?;
        let path = self.path_for(&entry.key_material);
        // write-then-rename so concurrent readers never see a partial file
        let tmp = path.with_extension(format!("tmp{}", std::process::id()));
        std::fs::write(&tmp, serde_json::to_string(entry)?).map_err(|e| HarnessError::io(&tmp, e))?;
        std::fs::rename(&tmp, &path).map_err(|e| HarnessError::io(&path, e))?;
        info!("reference cached: {}", path.display());
        Ok(path)
    }
}
