//! Run manifests: every output set is written alongside a manifest recording
//! the resolved configuration, master seed, tool version, and timestamps.
//! Re-running with the manifest's config and seed reproduces the outputs
//! byte for byte (the timestamps are the only fields that differ).

use serde::Serialize;
use std::path::Path;
use std::time::{SystemTime, UNIX_EPOCH};

#[derive(Debug, Serialize)]
pub struct RunManifest {
    pub subcommand: String,
    pub version: String,
    pub master_seed: u64,
    pub threads: usize,
    pub config: serde_json::Value,
    pub started_unix: u64,
    pub finished_unix: u64,
    pub outputs: Vec<String>,
}

pub fn unix_now() -> u64 {
    SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map(|d| d.as_secs())
        .unwrap_or(0)
}

impl RunManifest {
    pub fn write(&self, out_dir: &Path) -> std::io::Result<()> {
        let body = serde_json::to_string_pretty(self).expect("manifest serializes");
        std::fs::write(out_dir.join("manifest.json"), body)
    }
}
