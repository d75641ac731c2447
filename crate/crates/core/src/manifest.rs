//! Provenance record written next to every CLI output.

use std::path::Path;
use std::time::Instant;

use serde::{Deserialize, Serialize};
use serde_json::Value;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub command: String,
    pub config: Value,
    pub inputs: Vec<String>,
    pub seed: Option<u64>,
    pub version: String,
    pub wall_time_s: f64,
}

impl RunManifest {
    pub fn new(
        command: impl Into<String>,
        config: Value,
        inputs: Vec<String>,
        seed: Option<u64>,
        started: Instant,
    ) -> Self {
        Self {
            command: command.into(),
            config,
            inputs,
            seed,
            version: crate::VERSION.to_string(),
            wall_time_s: started.elapsed().as_secs_f64(),
        }
    }

    pub fn write(&self, path: impl AsRef<Path>) -> std::io::Result<()> {
        let text = serde_json::to_string_pretty(self).expect("manifest serializes");
        std::fs::write(path, text + "\n")
    }
}
