//! Experiment manifest: enough to reproduce a run byte for byte.

use agsched_core::config::SimConfig;
use anyhow::{Context, Result};
use serde::{Deserialize, Serialize};
use std::path::Path;

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Manifest {
    pub tool: String,
    pub version: String,
    /// Full resolved flat config snapshot.
    pub config: serde_json::Value,
    /// Content hash of the resolved config plus any input trace file.
    pub dataset_fingerprint: String,
    pub seeds: Vec<u64>,
    pub algorithms: Vec<String>,
    pub traces_path: Option<String>,
    pub outputs: Vec<String>,
}

impl Manifest {
    pub fn load(path: &Path) -> Result<Manifest> {
        let text = std::fs::read_to_string(path)
            .with_context(|| format!("reading manifest {}", path.display()))?;
        serde_json::from_str(&text).with_context(|| format!("parsing manifest {}", path.display()))
    }
}

/// FNV-1a over the canonical config bytes and the trace file, if any.
pub fn fingerprint(config: &SimConfig, traces: Option<&Path>) -> Result<String> {
    let mut hash = Fnv1a::new();
    hash.update(serde_json::to_string(&config.to_flat_json())?.as_bytes());
    if let Some(path) = traces {
        hash.update(&std::fs::read(path)?);
    }
    Ok(format!("fnv1a:{:016x}", hash.finish()))
}

pub struct Fnv1a(u64);

impl Fnv1a {
    pub fn new() -> Self {
        Fnv1a(0xcbf29ce484222325)
    }

    pub fn update(&mut self, bytes: &[u8]) {
        for &b in bytes {
            self.0 ^= b as u64;
            self.0 = self.0.wrapping_mul(0x100000001b3);
        }
    }

    pub fn finish(&self) -> u64 {
        self.0
    }
}
