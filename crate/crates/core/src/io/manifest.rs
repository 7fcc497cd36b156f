use std::collections::BTreeMap;
use std::fs;
use std::io;
use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

pub const MANIFEST_FILE: &str = "manifest.json";

/// Provenance record written next to every set of outputs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub command: String,
    pub config_hash: String,
    /// File name to SHA-256 of its contents.
    pub input_hashes: BTreeMap<String, String>,
    pub seed: u64,
    pub tool_version: String,
    pub timestamp: String,
}

pub fn hash_file(path: &Path) -> io::Result<String> {
    let bytes = fs::read(path)?;
    Ok(hex::encode(Sha256::digest(&bytes)))
}

impl RunManifest {
    /// Hashes `inputs`; `config` is hashed separately as well when given.
    pub fn new(command: impl Into<String>, config: Option<&Path>, inputs: &[&Path], seed: u64) -> io::Result<Self> {
        let mut input_hashes = BTreeMap::new();
        for p in inputs {
            let name = p.file_name().map_or_else(|| p.display().to_string(), |f| f.to_string_lossy().into_owned());
            input_hashes.insert(name, hash_file(p)?);
        }
        let config_hash = match config {
            Some(p) => hash_file(p)?,
            None => String::new(),
        };
        Ok(RunManifest {
            command: command.into(),
            config_hash,
            input_hashes,
            seed,
            tool_version: env!("CARGO_PKG_VERSION").to_string(),
            timestamp: chrono::Utc::now().to_rfc3339_opts(chrono::SecondsFormat::Secs, true),
        })
    }

    pub fn write(&self, dir: &Path) -> io::Result<()> {
        let mut text = serde_json::to_string_pretty(self).map_err(io::Error::other)?;
        text.push('\n');
        fs::write(dir.join(MANIFEST_FILE), text)
    }

    pub fn read(dir: &Path) -> io::Result<Self> {
        let text = fs::read_to_string(dir.join(MANIFEST_FILE))?;
        serde_json::from_str(&text).map_err(io::Error::other)
    }
}
