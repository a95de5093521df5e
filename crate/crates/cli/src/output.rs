//! Deterministic CSV and JSON writers and the run manifest.

use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use serde::Serialize;
use serde_json::Value;
use sha2::{Digest, Sha256};

use crate::config::ToolConfig;
use crate::error::CliError;

/// Shortest decimal that reads back to the same `f64`.
pub fn fmt_float(v: f64) -> String {
    format!("{v:?}")
}

/// Collects the files a command writes into the output directory.
#[derive(Debug)]
pub struct OutputDir {
    root: PathBuf,
    written: Vec<String>,
}

impl OutputDir {
    pub fn create(root: &Path) -> Result<Self, CliError> {
        std::fs::create_dir_all(root)?;
        Ok(Self { root: root.to_path_buf(), written: Vec::new() })
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    pub fn written(&self) -> &[String] {
        &self.written
    }

    /// Write a CSV file with LF line endings.
    pub fn csv(&mut self, name: &str, header: &[&str], rows: &[Vec<String>]) -> Result<(), CliError> {
        let mut w = csv::WriterBuilder::new()
            .terminator(csv::Terminator::Any(b'\n'))
            .from_path(self.root.join(name))?;
        w.write_record(header)?;
        for row in rows {
            debug_assert_eq!(row.len(), header.len());
            w.write_record(row)?;
        }
        w.flush()?;
        self.written.push(name.to_string());
        Ok(())
    }

    /// Write pretty JSON with keys in lexicographic order.
    pub fn json<T: Serialize>(&mut self, name: &str, value: &T) -> Result<(), CliError> {
        std::fs::write(self.root.join(name), to_sorted_json(value)?)?;
        self.written.push(name.to_string());
        Ok(())
    }
}

/// `serde_json::Value` keeps object keys in a sorted map, so a round trip
/// through it fixes the key order.
pub fn to_sorted_json<T: Serialize>(value: &T) -> Result<String, CliError> {
    let v: Value = serde_json::to_value(value)?;
    let mut text = serde_json::to_string_pretty(&v)?;
    text.push('\n');
    Ok(text)
}

/// SHA-256 of the canonical JSON form of the effective configuration.
pub fn config_digest(config: &ToolConfig) -> Result<String, CliError> {
    let v: Value = serde_json::to_value(config)?;
    let bytes = serde_json::to_vec(&v)?;
    let digest = Sha256::digest(&bytes);
    Ok(digest.iter().map(|b| format!("{b:02x}")).collect())
}

pub fn unix_millis() -> u128 {
    SystemTime::now().duration_since(UNIX_EPOCH).map(|d| d.as_millis()).unwrap_or(0)
}

#[derive(Debug, Clone, Serialize)]
pub struct Timestamps {
    pub started_unix_ms: u128,
    pub finished_unix_ms: u128,
}

#[derive(Debug, Clone, Serialize)]
pub struct RunManifest {
    pub tool: &'static str,
    pub version: &'static str,
    pub command: String,
    pub config_digest: String,
    pub seed: Option<u64>,
    pub timestamps: Timestamps,
    pub outputs: Vec<String>,
}
