//! Per-run provenance record written next to every CLI output.

use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::Result;

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub tool: String,
    pub version: String,
    pub command_line: Vec<String>,
    pub config_path: Option<String>,
    /// sha256 of the config file bytes.
    pub config_sha256: Option<String>,
    pub seeds: Vec<u64>,
    pub wall_time_s: f64,
    /// Mean bath spins per realization, for Monte Carlo runs.
    pub mean_spins: Option<f64>,
    pub outputs: Vec<String>,
    pub warnings: Vec<String>,
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes).iter().map(|b| format!("{b:02x}")).collect()
}

impl RunManifest {
    pub fn new(command_line: Vec<String>) -> Self {
        RunManifest {
            tool: "spinlab".into(),
            version: env!("CARGO_PKG_VERSION").into(),
            command_line,
            ..Default::default()
        }
    }

    pub fn with_config(mut self, path: &Path) -> Result<Self> {
        let bytes = std::fs::read(path)?;
        self.config_path = Some(path.display().to_string());
        self.config_sha256 = Some(sha256_hex(&bytes));
        Ok(self)
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        let json = serde_json::to_string_pretty(self).expect("manifest serializes");
        std::fs::write(path, json + "\n")?;
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sha256_known_vector() {
        assert_eq!(sha256_hex(b"abc"), "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
    }
}
