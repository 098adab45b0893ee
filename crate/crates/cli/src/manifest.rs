//! Run manifest: configuration hash, tool version, per-task seeds, wall
//! clock, and digests of every emitted file. Output files are written
//! temp-then-rename so a failing task never corrupts finished artifacts.

use serde::Serialize;
use sha2::{Digest, Sha256};
use std::collections::BTreeMap;
use std::io;
use std::path::{Path, PathBuf};

#[derive(Debug, Serialize)]
pub struct RunManifest {
    pub tool_version: String,
    pub command: String,
    pub config_sha256: String,
    pub root_seed: u64,
    pub task_seeds: BTreeMap<String, u64>,
    pub notes: BTreeMap<String, String>,
    pub outputs: BTreeMap<String, String>,
    pub wall_clock_seconds: f64,
}

impl RunManifest {
    pub fn new(command: &str, config_bytes: &[u8], root_seed: u64) -> Self {
        RunManifest {
            tool_version: env!("CARGO_PKG_VERSION").to_string(),
            command: command.to_string(),
            config_sha256: hex_digest(config_bytes),
            root_seed,
            task_seeds: BTreeMap::new(),
            notes: BTreeMap::new(),
            outputs: BTreeMap::new(),
            wall_clock_seconds: 0.0,
        }
    }

    pub fn record_seed(&mut self, task: &str, seed: u64) {
        self.task_seeds.insert(task.to_string(), seed);
    }

    pub fn note(&mut self, key: &str, value: impl ToString) {
        self.notes.insert(key.to_string(), value.to_string());
    }

    /// Write `bytes` to `dir/name` via a temp file, recording its digest.
    pub fn emit(&mut self, dir: &Path, name: &str, bytes: &[u8]) -> io::Result<PathBuf> {
        std::fs::create_dir_all(dir)?;
        let target = dir.join(name);
        let tmp = dir.join(format!(".{name}.tmp"));
        std::fs::write(&tmp, bytes)?;
        std::fs::rename(&tmp, &target)?;
        self.outputs.insert(name.to_string(), hex_digest(bytes));
        Ok(target)
    }

    pub fn finish(mut self, dir: &Path, started: std::time::Instant) -> io::Result<()> {
        self.wall_clock_seconds = started.elapsed().as_secs_f64();
        let text = serde_json::to_string_pretty(&self).expect("manifest serializes");
        std::fs::create_dir_all(dir)?;
        let tmp = dir.join(".manifest.json.tmp");
        std::fs::write(&tmp, text)?;
        std::fs::rename(tmp, dir.join("manifest.json"))?;
        Ok(())
    }
}

pub fn hex_digest(bytes: &[u8]) -> String {
    let mut hasher = Sha256::new();
    hasher.update(bytes);
    let out = hasher.finalize();
    out.iter().map(|b| format!("{b:02x}")).collect()
}
