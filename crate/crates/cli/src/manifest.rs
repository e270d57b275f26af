//! Run manifests: one JSON document per run with the resolved config, its
//! canonical hash, the seed, timestamps, and the produced output files.
//! Written before computation starts and finalized when it ends.

use std::path::{Path, PathBuf};

use serde::Serialize;

use crate::errors::{CliError, CliResult};

#[derive(Clone, Debug, Serialize)]
pub struct RunManifest {
    pub subcommand: String,
    pub tool_version: String,
    pub master_seed: u64,
    pub config: serde_json::Value,
    pub config_hash: String,
    pub started_at: String,
    pub finished_at: Option<String>,
    pub status: String,
    pub outputs: Vec<String>,
    #[serde(skip_serializing_if = "serde_json::Value::is_null")]
    pub results: serde_json::Value,
    #[serde(skip)]
    path: PathBuf,
}

impl RunManifest {
    /// Create and immediately persist a manifest in `running` state.
    pub fn start(
        path: &Path,
        subcommand: &str,
        master_seed: u64,
        config: serde_json::Value,
        config_hash: String,
    ) -> CliResult<Self> {
        let manifest = RunManifest {
            subcommand: subcommand.to_string(),
            tool_version: env!("CARGO_PKG_VERSION").to_string(),
            master_seed,
            config,
            config_hash,
            started_at: chrono::Utc::now().to_rfc3339(),
            finished_at: None,
            status: "running".to_string(),
            outputs: Vec::new(),
            results: serde_json::Value::Null,
            path: path.to_path_buf(),
        };
        manifest.write()?;
        Ok(manifest)
    }

    /// Record the produced outputs and results, then persist as `ok`.
    pub fn finish(mut self, outputs: Vec<PathBuf>, results: serde_json::Value) -> CliResult<()> {
        self.outputs = outputs
            .iter()
            .map(|p| p.display().to_string())
            .collect();
        self.results = results;
        self.finished_at = Some(chrono::Utc::now().to_rfc3339());
        self.status = "ok".to_string();
        self.write()
    }

    fn write(&self) -> CliResult<()> {
        if let Some(parent) = self.path.parent() {
            std::fs::create_dir_all(parent)?;
        }
        let text = serde_json::to_string_pretty(self)
            .map_err(|e| CliError::data(format!("manifest serialization: {e}")))?;
        std::fs::write(&self.path, text)?;
        Ok(())
    }
}

/// Manifest path companion to an output file: `runs/x.csv` ->
/// `runs/x.manifest.json`.
pub fn manifest_path_for(output: &Path) -> PathBuf {
    let stem = output
        .file_stem()
        .map(|s| s.to_string_lossy().to_string())
        .unwrap_or_else(|| "run".to_string());
    output.with_file_name(format!("{stem}.manifest.json"))
}
