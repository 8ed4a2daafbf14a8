//! Machine-readable record of one pipeline run.
//!
//! Every command that produces a file drops a `<output>.manifest.json` beside
//! its primary output: which subcommand ran, the input and output paths, a
//! hash of the effective configuration, and headline counts. Diffing two
//! manifests shows at a glance whether the same inputs and settings were in
//! play, which is what makes a run auditable after the fact.

use anyhow::Context;
use proofpipe_core::config::PipelineConfig;
use serde::Serialize;
use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

#[derive(Debug, Serialize)]
pub struct RunManifest {
    pub subcommand: String,
    pub inputs: Vec<PathBuf>,
    pub outputs: Vec<PathBuf>,
    /// SHA-256 of the effective configuration, defaults included.
    pub config_sha256: String,
    pub counts: BTreeMap<String, u64>,
    pub created_unix: u64,
}

impl RunManifest {
    pub fn new(subcommand: &str, config: &PipelineConfig) -> Self {
        RunManifest {
            subcommand: subcommand.to_owned(),
            inputs: Vec::new(),
            outputs: Vec::new(),
            config_sha256: config.content_hash(),
            counts: BTreeMap::new(),
            created_unix: SystemTime::now()
                .duration_since(UNIX_EPOCH)
                .map(|elapsed| elapsed.as_secs())
                .unwrap_or(0),
        }
    }

    pub fn input(mut self, path: &Path) -> Self {
        self.inputs.push(path.to_path_buf());
        self
    }

    pub fn output(mut self, path: &Path) -> Self {
        self.outputs.push(path.to_path_buf());
        self
    }

    pub fn count(mut self, name: &str, value: usize) -> Self {
        self.counts.insert(name.to_owned(), value as u64);
        self
    }

    /// Writes the manifest as `<file name>.manifest.json` next to the primary
    /// output and returns the path written.
    pub fn write_beside(&self, primary_output: &Path) -> anyhow::Result<PathBuf> {
        let path = manifest_path(primary_output);
        let body = serde_json::to_string_pretty(self)?;
        std::fs::write(&path, body + "\n")
            .with_context(|| format!("cannot write {}", path.display()))?;
        Ok(path)
    }
}

fn manifest_path(primary: &Path) -> PathBuf {
    let mut name = primary
        .file_name()
        .map(|name| name.to_os_string())
        .unwrap_or_else(|| "out".into());
    name.push(".manifest.json");
    primary.with_file_name(name)
}
