//! Record of one benchmark run: per-stage timings and content digests.

use std::path::Path;

use anyhow::{Context, Result};
use serde::{Deserialize, Serialize};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StageRecord {
    pub name: String,
    pub seconds: f64,
    pub input_digest: String,
    pub output_digest: String,
    /// Whether the stage output came from the cache.
    pub cached: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub config_hash: String,
    pub artifact_version: String,
    pub stages: Vec<StageRecord>,
    pub completed: bool,
    pub failed_stage: Option<String>,
}

impl RunManifest {
    pub fn new(config_hash: String) -> Self {
        Self {
            config_hash,
            artifact_version: env!("CARGO_PKG_VERSION").to_string(),
            stages: Vec::new(),
            completed: false,
            failed_stage: None,
        }
    }

    pub fn stage(&self, name: &str) -> Option<&StageRecord> {
        self.stages.iter().find(|s| s.name == name)
    }

    /// Digests only, in stage order; equal for reruns of the same config.
    pub fn digests(&self) -> Vec<(String, String, String)> {
        self.stages.iter().map(|s| (s.name.clone(), s.input_digest.clone(), s.output_digest.clone())).collect()
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        let text = serde_json::to_string_pretty(self)?;
        std::fs::write(path, text).with_context(|| format!("writing {}", path.display()))
    }

    pub fn read(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        Ok(serde_json::from_str(&text)?)
    }
}
