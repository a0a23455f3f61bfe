use std::path::{Path, PathBuf};

use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::commands::CliError;

/// Written beside every command's outputs. Contains nothing time- or
/// host-dependent so a re-run reproduces it byte for byte.
#[derive(Debug, Serialize)]
pub struct Manifest {
    pub tool: &'static str,
    pub version: &'static str,
    pub command: Vec<String>,
    pub subcommand: &'static str,
    pub seed: u64,
    pub config: Option<String>,
    pub config_sha256: Option<String>,
    pub outputs: Vec<String>,
}

impl Manifest {
    pub fn new(argv: &[String], subcommand: &'static str, seed: u64) -> Self {
        Manifest {
            tool: env!("CARGO_PKG_NAME"),
            version: env!("CARGO_PKG_VERSION"),
            command: argv.iter().skip(1).cloned().collect(),
            subcommand,
            seed,
            config: None,
            config_sha256: None,
            outputs: Vec::new(),
        }
    }

    /// Records a config by path and content hash.
    pub fn config(&mut self, path: &Path, bytes: &[u8]) {
        self.config = Some(path.display().to_string());
        self.config_sha256 = Some(hex::encode(Sha256::digest(bytes)));
    }

    /// Records compiled-in defaults by hashing their serialized form.
    pub fn builtin_config(&mut self, name: &str, text: &str) {
        self.config = Some(format!("builtin:{name}"));
        self.config_sha256 = Some(hex::encode(Sha256::digest(text.as_bytes())));
    }

    pub fn output(&mut self, path: &Path) {
        self.outputs.push(path.display().to_string());
    }

    pub fn write(&self, dir: &Path) -> Result<PathBuf, CliError> {
        let path = dir.join("manifest.json");
        let mut text = serde_json::to_string_pretty(self).expect("manifest serializes");
        text.push('\n');
        std::fs::write(&path, text).map_err(|e| CliError::io(&path, e))?;
        Ok(path)
    }
}
