use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use serde::Serialize;

use qsi_core::io::{write_json, IoError};
use qsi_core::optics::InterferometerConfig;

pub const MANIFEST_FILE: &str = "manifest.json";

/// Provenance record written into every output directory. It is the only
/// output that carries a timestamp.
#[derive(Debug, Clone, Serialize)]
pub struct RunManifest {
    pub command: &'static str,
    pub args: Vec<String>,
    pub inputs: Vec<PathBuf>,
    pub out_dir: PathBuf,
    pub seed: u64,
    pub config_overrides: Vec<String>,
    pub config: InterferometerConfig,
    pub tool_version: &'static str,
    /// Seconds since the Unix epoch.
    pub timestamp: u64,
}

impl RunManifest {
    pub fn new(command: &'static str, out_dir: &Path, seed: u64, config: &InterferometerConfig, overrides: &[String]) -> Self {
        Self {
            command,
            args: std::env::args().skip(1).collect(),
            inputs: Vec::new(),
            out_dir: out_dir.to_path_buf(),
            seed,
            config_overrides: overrides.to_vec(),
            config: config.clone(),
            tool_version: env!("CARGO_PKG_VERSION"),
            timestamp: SystemTime::now().duration_since(UNIX_EPOCH).map_or(0, |d| d.as_secs()),
        }
    }

    pub fn write(&self) -> Result<(), IoError> {
        write_json(&self.out_dir.join(MANIFEST_FILE), self)
    }
}
