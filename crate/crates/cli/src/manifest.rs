//! Run manifests: what was run, on which inputs, with which parameters.

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;
use std::time::Instant;

use serde::Serialize;
use serde_json::{json, Value};
use sha2::{Digest, Sha256};

use crate::error::{CliError, Result};

pub const MANIFEST_FILE: &str = "manifest.json";

#[derive(Debug, Clone, Serialize)]
pub struct RunManifest {
    pub tool: &'static str,
    pub version: &'static str,
    pub command: String,
    pub seed: u64,
    /// Every parameter that affects the data outputs.
    pub config: Value,
    /// SHA-256 of each input, keyed by role.
    pub inputs: BTreeMap<String, String>,
    /// SHA-256 over version, command, seed, config and inputs.
    pub digest: String,
    /// Where the inputs were read from; informational, not digested.
    pub paths: BTreeMap<String, String>,
    pub threads: usize,
    pub duration_secs: f64,
}

pub struct ManifestBuilder {
    command: String,
    seed: u64,
    config: Value,
    inputs: BTreeMap<String, String>,
    paths: BTreeMap<String, String>,
    start: Instant,
}

pub fn sha256_bytes(data: &[u8]) -> String {
    hex::encode(Sha256::digest(data))
}

pub fn sha256_file(path: &Path) -> Result<String> {
    let data = fs::read(path).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?;
    Ok(sha256_bytes(&data))
}

/// Digest of a directory tree: relative paths and file digests, sorted.
pub fn sha256_dir(dir: &Path) -> Result<String> {
    fn walk(root: &Path, dir: &Path, out: &mut Vec<(String, String)>) -> Result<()> {
        let rd = fs::read_dir(dir).map_err(|e| CliError::Io(format!("{}: {e}", dir.display())))?;
        for entry in rd {
            let p = entry?.path();
            if p.is_dir() {
                walk(root, &p, out)?;
            } else {
                let rel = p.strip_prefix(root).unwrap_or(&p).to_string_lossy().replace('\\', "/");
                out.push((rel, sha256_file(&p)?));
            }
        }
        Ok(())
    }
    let mut files = Vec::new();
    walk(dir, dir, &mut files)?;
    files.sort();
    let mut h = Sha256::new();
    for (name, d) in files {
        h.update(name.as_bytes());
        h.update(b"\0");
        h.update(d.as_bytes());
        h.update(b"\n");
    }
    Ok(hex::encode(h.finalize()))
}

impl ManifestBuilder {
    pub fn new(command: &str, seed: u64, config: Value) -> Self {
        Self {
            command: command.into(),
            seed,
            config,
            inputs: BTreeMap::new(),
            paths: BTreeMap::new(),
            start: Instant::now(),
        }
    }

    pub fn input_file(&mut self, role: &str, path: &Path) -> Result<()> {
        self.inputs.insert(role.into(), sha256_file(path)?);
        self.paths.insert(role.into(), path.display().to_string());
        Ok(())
    }

    pub fn input_dir(&mut self, role: &str, path: &Path) -> Result<()> {
        self.inputs.insert(role.into(), sha256_dir(path)?);
        self.paths.insert(role.into(), path.display().to_string());
        Ok(())
    }

    pub fn digest(&self) -> String {
        let body = json!({
            "version": env!("CARGO_PKG_VERSION"),
            "command": self.command,
            "seed": self.seed,
            "config": self.config,
            "inputs": self.inputs,
        });
        sha256_bytes(body.to_string().as_bytes())
    }

    pub fn finish(self, out_dir: &Path) -> Result<RunManifest> {
        let m = RunManifest {
            tool: env!("CARGO_PKG_NAME"),
            version: env!("CARGO_PKG_VERSION"),
            digest: self.digest(),
            command: self.command,
            seed: self.seed,
            config: self.config,
            inputs: self.inputs,
            paths: self.paths,
            threads: rayon::current_num_threads(),
            duration_secs: self.start.elapsed().as_secs_f64(),
        };
        fs::create_dir_all(out_dir).map_err(|e| CliError::Io(format!("{}: {e}", out_dir.display())))?;
        liqnet::io::write_json(&out_dir.join(MANIFEST_FILE), &m)?;
        Ok(m)
    }
}
