//! `manifest.json`: what a run did and which files it left behind.

use std::path::Path;

use chunkgen_core::search::RunRecord;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::config::RunConfig;
use crate::error::{HarnessError, Result};

pub const MANIFEST_FILE: &str = "manifest.json";

pub const METRIC_SUBSTITUTION: &str = "metric-substitution: subject consistency uses an \
average-pooled layout embedding instead of DINO features, background consistency uses \
per-channel intensity histograms instead of CLIP features, and motion smoothness \
reconstructs odd frames by linear interpolation instead of AMT; values are not \
comparable to VBench scores";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FileEntry {
    /// Relative to the run directory, '/'-separated.
    pub path: String,
    pub bytes: u64,
    pub sha256: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PhaseTiming {
    pub phase: String,
    pub seconds: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub tool: String,
    pub version: String,
    pub command: String,
    pub config: RunConfig,
    pub files: Vec<FileEntry>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub run: Option<RunRecord>,
    pub timings: Vec<PhaseTiming>,
    pub notices: Vec<String>,
}

impl Manifest {
    pub fn new(command: &str, config: &RunConfig) -> Self {
        Self {
            tool: env!("CARGO_PKG_NAME").into(),
            version: env!("CARGO_PKG_VERSION").into(),
            command: command.into(),
            config: config.clone(),
            files: Vec::new(),
            run: None,
            timings: Vec::new(),
            notices: vec![METRIC_SUBSTITUTION.into()],
        }
    }

    pub fn add_file(&mut self, dir: &Path, rel: &str) -> Result<()> {
        let path = dir.join(rel);
        let bytes = std::fs::read(&path).map_err(|e| HarnessError::io(&path, e))?;
        self.files.push(FileEntry {
            path: rel.into(),
            bytes: bytes.len() as u64,
            sha256: hex::encode(Sha256::digest(&bytes)),
        });
        Ok(())
    }

    pub fn time(&mut self, phase: &str, start: std::time::Instant) {
        self.timings.push(PhaseTiming {
            phase: phase.into(),
            seconds: start.elapsed().as_secs_f64(),
        });
    }

    pub fn write(&self, dir: &Path) -> Result<()> {
        let path = dir.join(MANIFEST_FILE);
        let mut text = serde_json::to_string_pretty(self)
            .map_err(|e| HarnessError::Internal(e.to_string()))?;
        text.push('\n');
        std::fs::write(&path, text).map_err(|e| HarnessError::io(&path, e))
    }

    pub fn read(dir: &Path) -> Result<Self> {
        let path = dir.join(MANIFEST_FILE);
        let text = std::fs::read_to_string(&path).map_err(|e| HarnessError::io(&path, e))?;
        serde_json::from_str(&text)
            .map_err(|e| HarnessError::Config(format!("{}: {e}", path.display())))
    }

    /// Files whose size or digest no longer matches.
    pub fn verify(&self, dir: &Path) -> Vec<String> {
        self.files
            .iter()
            .filter(|f| match std::fs::read(dir.join(&f.path)) {
                Ok(b) => b.len() as u64 != f.bytes || hex::encode(Sha256::digest(&b)) != f.sha256,
                Err(_) => true,
            })
            .map(|f| f.path.clone())
            .collect()
    }
}
