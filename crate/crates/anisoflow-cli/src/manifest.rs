//! Deterministic run manifests.
//!
//! Every command writes a `manifest.json` capturing the command name,
//! the full parameter set, SHA-256 hashes of the inputs, every output
//! file it produced and per-stage diagnostics. Keys serialize sorted
//! (BTree maps throughout), so the manifest layout is reproducible.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use anyhow::{Context, Result};
use serde::Serialize;
use sha2::{Digest, Sha256};

#[derive(Debug, Serialize)]
pub struct RunManifest {
    pub command: String,
    pub version: String,
    pub parameters: BTreeMap<String, serde_json::Value>,
    pub input_hashes: BTreeMap<String, String>,
    pub outputs: Vec<String>,
    pub diagnostics: BTreeMap<String, serde_json::Value>,
    pub wall_time_s: f64,
}

pub struct ManifestBuilder {
    manifest: RunManifest,
    started: Instant,
    out_dir: PathBuf,
}

impl ManifestBuilder {
    pub fn new(command: &str, out_dir: &Path) -> Result<Self> {
        fs::create_dir_all(out_dir)
            .with_context(|| format!("creating output directory {}", out_dir.display()))?;
        Ok(Self {
            manifest: RunManifest {
                command: command.to_string(),
                version: env!("CARGO_PKG_VERSION").to_string(),
                parameters: BTreeMap::new(),
                input_hashes: BTreeMap::new(),
                outputs: Vec::new(),
                diagnostics: BTreeMap::new(),
                wall_time_s: 0.0,
            },
            started: Instant::now(),
            out_dir: out_dir.to_path_buf(),
        })
    }

    pub fn param(&mut self, key: &str, value: impl Serialize) -> &mut Self {
        self.manifest
            .parameters
            .insert(key.to_string(), serde_json::to_value(value).unwrap());
        self
    }

    pub fn diagnostic(&mut self, key: &str, value: impl Serialize) {
        self.manifest
            .diagnostics
            .insert(key.to_string(), serde_json::to_value(value).unwrap());
    }

    pub fn hash_input(&mut self, path: &Path) -> Result<()> {
        let bytes =
            fs::read(path).with_context(|| format!("reading input {}", path.display()))?;
        let mut hasher = Sha256::new();
        hasher.update(&bytes);
        let digest = hasher.finalize();
        let hex: String = digest.iter().map(|b| format!("{b:02x}")).collect();
        self.manifest
            .input_hashes
            .insert(path.display().to_string(), hex);
        Ok(())
    }

    /// Register an output path (relative to the output directory).
    pub fn output(&mut self, name: &str) -> PathBuf {
        self.manifest.outputs.push(name.to_string());
        self.out_dir.join(name)
    }

    /// Write the manifest atomically next to the outputs.
    pub fn finish(mut self) -> Result<PathBuf> {
        self.manifest.wall_time_s = self.started.elapsed().as_secs_f64();
        self.manifest.outputs.push("manifest.json".to_string());
        self.manifest.outputs.sort();
        let path = self.out_dir.join("manifest.json");
        let tmp = self.out_dir.join("manifest.json.tmp");
        let body = serde_json::to_string_pretty(&self.manifest)?;
        fs::write(&tmp, body)?;
        fs::rename(&tmp, &path)?;
        Ok(path)
    }
}

/// Write a CSV file with '.' decimals, comma separators and a header row.
pub fn write_csv(path: &Path, header: &str, rows: impl Iterator<Item = String>) -> Result<()> {
    let mut body = String::from(header);
    body.push('\n');
    for row in rows {
        body.push_str(&row);
        body.push('\n');
    }
    fs::write(path, body)?;
    Ok(())
}
