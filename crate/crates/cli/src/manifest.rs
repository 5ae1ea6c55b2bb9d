use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use anyhow::Result;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

/// Provenance record written next to every command's output.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunManifest {
    pub command: String,
    pub args: Vec<String>,
    pub tool_version: String,
    pub config_digest: String,
    pub seed: Option<u64>,
    pub inputs: Vec<PathBuf>,
    pub outputs: Vec<PathBuf>,
    pub started_unix_s: f64,
    pub finished_unix_s: f64,
}

fn now() -> f64 {
    SystemTime::now().duration_since(UNIX_EPOCH).map_or(0.0, |d| d.as_secs_f64())
}

pub fn digest_of<T: Serialize>(value: &T) -> String {
    hex::encode(Sha256::digest(serde_json::to_vec(value).expect("config serialises")))
}

impl RunManifest {
    pub const FILE_NAME: &'static str = "run.json";

    pub fn start(command: &str, config_digest: String, seed: Option<u64>) -> Self {
        RunManifest {
            command: command.into(),
            args: std::env::args().skip(1).collect(),
            tool_version: env!("CARGO_PKG_VERSION").into(),
            config_digest,
            seed,
            inputs: Vec::new(),
            outputs: Vec::new(),
            started_unix_s: now(),
            finished_unix_s: 0.0,
        }
    }

    pub fn finish(mut self, dir: &Path) -> Result<()> {
        self.finished_unix_s = now();
        std::fs::write(dir.join(Self::FILE_NAME), serde_json::to_string_pretty(&self)?)?;
        Ok(())
    }
}
