//! CSV artifacts and the run manifest.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use hemadyn::model::{HillRates, ModelParams};
use serde::{Deserialize, Serialize};

use crate::config::RunOptions;
use crate::error::CliError;

/// Shortest round-trip decimal form.
pub fn num(x: f64) -> String {
    x.to_string()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OutputFile {
    pub path: String,
    pub columns: Vec<String>,
    pub rows: usize,
}

/// Writes CSV files into one directory and remembers what it wrote.
#[derive(Debug)]
pub struct OutputSet {
    dir: PathBuf,
    files: Vec<OutputFile>,
}

impl OutputSet {
    pub fn new(dir: &Path) -> Result<Self, CliError> {
        fs::create_dir_all(dir).map_err(|source| CliError::Io { path: dir.display().to_string(), source })?;
        Ok(Self { dir: dir.to_path_buf(), files: Vec::new() })
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    /// `name` is relative to the output directory unless absolute.
    pub fn write_csv(&mut self, name: &Path, columns: &[&str], rows: &[Vec<String>]) -> Result<PathBuf, CliError> {
        let path = self.dir.join(name);
        if let Some(parent) = path.parent() {
            fs::create_dir_all(parent).map_err(|source| CliError::Io { path: parent.display().to_string(), source })?;
        }
        let csv_err = |source| CliError::Csv { path: path.display().to_string(), source };
        let mut w = csv::Writer::from_path(&path).map_err(csv_err)?;
        w.write_record(columns).map_err(csv_err)?;
        for row in rows {
            debug_assert_eq!(row.len(), columns.len());
            w.write_record(row).map_err(csv_err)?;
        }
        w.flush().map_err(|source| CliError::Io { path: path.display().to_string(), source })?;
        self.files.push(OutputFile {
            path: path.display().to_string(),
            columns: columns.iter().map(|c| c.to_string()).collect(),
            rows: rows.len(),
        });
        Ok(path)
    }

    pub fn files(&self) -> &[OutputFile] {
        &self.files
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Check {
    pub name: String,
    pub passed: bool,
    pub detail: String,
    /// Compares against the published reference values (only run on the
    /// reference parameter set).
    pub reference: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct RunManifest {
    pub subcommand: String,
    pub config_source: String,
    pub config_hash: String,
    pub parameters: ModelParams<HillRates>,
    pub run: RunOptions,
    pub seed: u64,
    pub outputs: Vec<OutputFile>,
    pub checks: Vec<Check>,
    pub notes: Vec<String>,
    pub results: BTreeMap<String, serde_json::Value>,
    pub duration_seconds: f64,
}

impl RunManifest {
    pub fn failed_checks(&self) -> Vec<String> {
        self.checks.iter().filter(|c| !c.passed).map(|c| c.name.clone()).collect()
    }

    pub fn write(&self, dir: &Path) -> Result<PathBuf, CliError> {
        let path = dir.join("manifest.json");
        let text = serde_json::to_string_pretty(self).expect("manifest serializes");
        fs::write(&path, text + "\n").map_err(|source| CliError::Io { path: path.display().to_string(), source })?;
        Ok(path)
    }
}
