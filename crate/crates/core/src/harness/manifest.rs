//! Provenance records: every command writes a `manifest.json` listing the
//! SHA-256 of its config, inputs and outputs. No timestamps, so reruns are
//! byte-identical.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};

pub const MANIFEST_FILE: &str = "manifest.json";

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

pub fn sha256_file(path: &Path) -> Result<String> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    Ok(sha256_hex(&bytes))
}

/// Path of `path` relative to `base`, with `/` separators.
fn relative(base: &Path, path: &Path) -> String {
    let rel = path.strip_prefix(base).unwrap_or(path);
    rel.components()
        .map(|c| c.as_os_str().to_string_lossy())
        .collect::<Vec<_>>()
        .join("/")
}

/// All regular files under `dir`, sorted.
pub fn list_files(dir: &Path) -> Result<Vec<PathBuf>> {
    let mut out = Vec::new();
    for entry in walkdir::WalkDir::new(dir).sort_by_file_name() {
        let entry = entry.map_err(|e| Error::Data(format!("{}: {e}", dir.display())))?;
        if entry.file_type().is_file() {
            out.push(entry.into_path());
        }
    }
    out.sort();
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub command: String,
    pub seed: u64,
    pub config_sha256: String,
    /// Input files keyed by `<role>/<relative path>`.
    pub inputs: BTreeMap<String, String>,
    /// Digest of the config digest and every input digest.
    pub input_sha256: String,
    /// Output files relative to the output directory.
    pub outputs: BTreeMap<String, String>,
    pub summary: serde_json::Value,
}

/// Collects inputs while a command runs.
#[derive(Debug, Default)]
pub struct ManifestBuilder {
    inputs: BTreeMap<String, String>,
}

impl ManifestBuilder {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn input_file(&mut self, role: &str, base: &Path, path: &Path) -> Result<()> {
        let key = format!("{role}/{}", relative(base, path));
        self.inputs.insert(key, sha256_file(path)?);
        Ok(())
    }

    /// Hashes every file under `dir` (except a manifest of its own).
    pub fn input_dir(&mut self, role: &str, dir: &Path) -> Result<()> {
        for p in list_files(dir)? {
            if p.file_name().is_some_and(|n| n == MANIFEST_FILE) {
                continue;
            }
            self.input_file(role, dir, &p)?;
        }
        Ok(())
    }

    /// Hashes `outputs` (paths under `out_dir`) and writes the manifest there.
    pub fn finish(
        self,
        command: &str,
        seed: u64,
        config_json: &str,
        out_dir: &Path,
        outputs: &[PathBuf],
        summary: serde_json::Value,
    ) -> Result<Manifest> {
        let config_sha256 = sha256_hex(config_json.as_bytes());
        let mut h = Sha256::new();
        h.update(config_sha256.as_bytes());
        for (k, v) in &self.inputs {
            h.update(b"\n");
            h.update(k.as_bytes());
            h.update(b"=");
            h.update(v.as_bytes());
        }
        let input_sha256 = hex::encode(h.finalize());
        let mut out = BTreeMap::new();
        for p in outputs {
            out.insert(relative(out_dir, p), sha256_file(p)?);
        }
        let manifest = Manifest {
            command: command.to_string(),
            seed,
            config_sha256,
            inputs: self.inputs,
            input_sha256,
            outputs: out,
            summary,
        };
        let path = out_dir.join(MANIFEST_FILE);
        let json = serde_json::to_string_pretty(&manifest).map_err(|e| Error::Data(e.to_string()))?;
        fs::write(&path, json + "\n").map_err(|e| Error::io(&path, e))?;
        Ok(manifest)
    }
}
