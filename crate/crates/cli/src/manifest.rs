use std::collections::BTreeMap;
use std::io::Read;
use std::path::Path;

use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::config::RunConfig;

/// Written next to every command's outputs.
#[derive(Debug, Clone, Serialize)]
pub struct RunManifest {
    pub tool: &'static str,
    pub version: &'static str,
    pub command: String,
    pub started_at: String,
    pub finished_at: String,
    pub config: RunConfig,
    /// sha256 of each input file, keyed by role.
    pub inputs: BTreeMap<String, String>,
    pub cassette_sha256: Option<String>,
    /// sha256 of each output file, keyed by file name.
    pub outputs: BTreeMap<String, String>,
    /// Command-specific details (sample selection, failure counts, ...).
    pub details: serde_json::Value,
}

pub fn now() -> String {
    chrono::Utc::now().to_rfc3339_opts(chrono::SecondsFormat::Millis, true)
}

pub fn sha256_file(path: &Path) -> std::io::Result<String> {
    let mut f = std::fs::File::open(path)?;
    let mut h = Sha256::new();
    let mut buf = [0u8; 64 * 1024];
    loop {
        let n = f.read(&mut buf)?;
        if n == 0 {
            break;
        }
        h.update(&buf[..n]);
    }
    Ok(hex::encode(h.finalize()))
}

impl RunManifest {
    pub fn new(command: &str, config: &RunConfig, started_at: String) -> Self {
        Self {
            tool: env!("CARGO_PKG_NAME"),
            version: env!("CARGO_PKG_VERSION"),
            command: command.to_string(),
            started_at,
            finished_at: String::new(),
            config: config.clone(),
            inputs: BTreeMap::new(),
            cassette_sha256: None,
            outputs: BTreeMap::new(),
            details: serde_json::Value::Null,
        }
    }

    pub fn input(&mut self, role: &str, path: &Path) -> std::io::Result<()> {
        self.inputs.insert(role.to_string(), sha256_file(path)?);
        Ok(())
    }

    pub fn output(&mut self, path: &Path) -> std::io::Result<()> {
        let name = path.file_name().map(|n| n.to_string_lossy().into_owned()).unwrap_or_default();
        self.outputs.insert(name, sha256_file(path)?);
        Ok(())
    }

    pub fn write(mut self, path: &Path) -> std::io::Result<()> {
        self.finished_at = now();
        let text = serde_json::to_string_pretty(&self).expect("manifest serialization cannot fail");
        std::fs::write(path, text + "\n")
    }
}
