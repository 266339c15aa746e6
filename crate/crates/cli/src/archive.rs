//! Dataset archives and run manifests.
//!
//! An archive is a directory holding `items.csv`, `transactions.csv`,
//! `load_report.jsonl` and `manifest.json`.

use std::collections::BTreeMap;
use std::fs;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use chrono::{SecondsFormat, Utc};
use mcrec_core::catalog::{load_items, load_transactions, ItemFormat};
use mcrec_core::Dataset;
use serde::Serialize;
use serde_json::Value;
use sha2::{Digest, Sha256};

use crate::CliError;

pub const ITEMS_FILE: &str = "items.csv";
pub const TRANSACTIONS_FILE: &str = "transactions.csv";
pub const LOAD_REPORT_FILE: &str = "load_report.jsonl";
pub const MANIFEST_FILE: &str = "manifest.json";

pub fn load_archive(dir: &Path) -> Result<Dataset, CliError> {
    let (items, _) = load_items(&dir.join(ITEMS_FILE), ItemFormat::Csv)?;
    let (transactions, report) = load_transactions(&dir.join(TRANSACTIONS_FILE), &items)?;
    if report.dropped_unknown_items > 0 {
        log::warn!(
            "{}: {} transactions reference unknown items and were skipped",
            dir.display(),
            report.dropped_unknown_items
        );
    }
    Ok(Dataset::new(items, transactions)?)
}

pub fn sha256_file(path: &Path) -> Result<String, CliError> {
    let bytes = fs::read(path).map_err(|e| CliError::io(path, e))?;
    Ok(sha256_hex(&bytes))
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes).iter().map(|b| format!("{b:02x}")).collect()
}

/// Creates `path`'s parent directory and writes through `fill`.
pub fn write_file(
    path: &Path,
    fill: impl FnOnce(&mut BufWriter<fs::File>) -> Result<(), CliError>,
) -> Result<(), CliError> {
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        fs::create_dir_all(parent).map_err(|e| CliError::io(parent, e))?;
    }
    let file = fs::File::create(path).map_err(|e| CliError::io(path, e))?;
    let mut out = BufWriter::new(file);
    fill(&mut out)?;
    out.flush().map_err(|e| CliError::io(path, e))
}

/// Provenance record written next to every output.
#[derive(Debug, Serialize)]
pub struct RunManifest {
    pub tool: &'static str,
    pub version: &'static str,
    pub command: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    pub config: Value,
    /// Input path → SHA-256 of its contents.
    pub inputs: BTreeMap<String, String>,
    /// Output path → SHA-256 of its contents.
    pub outputs: BTreeMap<String, String>,
    #[serde(skip_serializing_if = "BTreeMap::is_empty")]
    pub notes: BTreeMap<String, Value>,
    pub started_at: String,
    pub finished_at: String,
}

impl RunManifest {
    pub fn start(command: &str, seed: Option<u64>, config: Value) -> Self {
        RunManifest {
            tool: "mcrec",
            version: env!("CARGO_PKG_VERSION"),
            command: command.to_owned(),
            seed,
            config,
            inputs: BTreeMap::new(),
            outputs: BTreeMap::new(),
            notes: BTreeMap::new(),
            started_at: now(),
            finished_at: String::new(),
        }
    }

    pub fn input(&mut self, path: &Path) -> Result<(), CliError> {
        self.inputs.insert(path.display().to_string(), sha256_file(path)?);
        Ok(())
    }

    /// Records every regular file directly inside `dir` as an input.
    pub fn input_dir(&mut self, dir: &Path) -> Result<(), CliError> {
        for name in [ITEMS_FILE, TRANSACTIONS_FILE] {
            self.input(&dir.join(name))?;
        }
        Ok(())
    }

    pub fn output(&mut self, path: &Path) -> Result<(), CliError> {
        self.outputs.insert(path.display().to_string(), sha256_file(path)?);
        Ok(())
    }

    pub fn note(&mut self, key: &str, value: impl Serialize) {
        self.notes
            .insert(key.to_owned(), serde_json::to_value(value).expect("note serializes"));
    }

    pub fn finish(mut self, path: &Path) -> Result<PathBuf, CliError> {
        self.finished_at = now();
        let text = serde_json::to_string_pretty(&self).expect("manifest serializes");
        write_file(path, |out| writeln!(out, "{text}").map_err(|e| CliError::io(path, e)))?;
        Ok(path.to_owned())
    }
}

fn now() -> String {
    Utc::now().to_rfc3339_opts(SecondsFormat::Secs, true)
}
