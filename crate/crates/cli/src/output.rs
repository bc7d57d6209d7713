//! Artifact writing: sorted-key JSON, fixed-column CSV and the run manifest.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use serde::Serialize;
use serde_json::{json, Value};
use sha2::{Digest, Sha256};

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

/// Collects everything a run writes under one directory and finishes with
/// `manifest.json`.
pub struct RunDir {
    dir: PathBuf,
    outputs: Vec<String>,
    inputs: BTreeMap<String, Value>,
}

impl RunDir {
    pub fn create(dir: &Path) -> Result<Self, String> {
        fs::create_dir_all(dir).map_err(|e| format!("{}: {e}", dir.display()))?;
        Ok(RunDir { dir: dir.to_path_buf(), outputs: Vec::new(), inputs: BTreeMap::new() })
    }

    pub fn path(&self, name: &str) -> PathBuf {
        self.dir.join(name)
    }

    fn put(&mut self, name: &str, bytes: &[u8]) -> Result<(), String> {
        let p = self.path(name);
        fs::write(&p, bytes).map_err(|e| format!("{}: {e}", p.display()))?;
        self.outputs.push(name.to_string());
        Ok(())
    }

    /// Pretty JSON with keys sorted at every level.
    pub fn json<T: Serialize>(&mut self, name: &str, value: &T) -> Result<(), String> {
        let v = serde_json::to_value(value).map_err(|e| format!("{name}: {e}"))?;
        let mut s = serde_json::to_string_pretty(&v).map_err(|e| format!("{name}: {e}"))?;
        s.push('\n');
        self.put(name, s.as_bytes())
    }

    pub fn csv(&mut self, name: &str, header: &[String], rows: &[Vec<String>]) -> Result<(), String> {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(header).map_err(|e| format!("{name}: {e}"))?;
        for r in rows {
            w.write_record(r).map_err(|e| format!("{name}: {e}"))?;
        }
        let bytes = w.into_inner().map_err(|e| format!("{name}: {e}"))?;
        self.put(name, &bytes)
    }

    /// Records a file that was written by library code.
    pub fn external(&mut self, name: &str) {
        self.outputs.push(name.to_string());
    }

    pub fn input(&mut self, role: &str, path: &Path) -> Result<Vec<u8>, String> {
        let bytes = fs::read(path).map_err(|e| format!("{}: {e}", path.display()))?;
        self.inputs.insert(role.to_string(), json!({ "path": path.display().to_string(), "sha256": sha256_hex(&bytes) }));
        Ok(bytes)
    }

    pub fn finish(mut self, command: &str, seed: u64, config: &Value) -> Result<(), String> {
        let digest = sha256_hex(serde_json::to_string(config).map_err(|e| e.to_string())?.as_bytes());
        self.outputs.sort();
        let manifest = json!({
            "command": command,
            "config": config,
            "config_digest": digest,
            "inputs": self.inputs,
            "outputs": self.outputs,
            "seed": seed,
            "versions": { "sigma2-core": sigma2_core::VERSION, "sigma2-lab": env!("CARGO_PKG_VERSION") },
        });
        let s = serde_json::to_string_pretty(&manifest).map_err(|e| e.to_string())? + "\n";
        let p = self.path("manifest.json");
        fs::write(&p, s).map_err(|e| format!("{}: {e}", p.display()))
    }
}

/// Shortest round-trip decimal form.
pub fn num(x: f64) -> String {
    format!("{x:?}")
}
