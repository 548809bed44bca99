use std::path::{Path, PathBuf};

use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::failure::Failure;

#[derive(Debug, Serialize)]
pub struct FileEntry {
    pub path: PathBuf,
    pub sha256: String,
}

/// Record of one invocation, written next to its primary output.
#[derive(Debug, Serialize)]
pub struct RunManifest {
    pub subcommand: String,
    pub version: String,
    pub config: serde_json::Value,
    pub seed: u64,
    pub threads: usize,
    pub started_at: String,
    pub finished_at: String,
    pub inputs: Vec<FileEntry>,
    pub outputs: Vec<FileEntry>,
}

pub fn sha256_file(path: &Path) -> Result<String, Failure> {
    let bytes = std::fs::read(path).map_err(|e| Failure::io(path, e))?;
    Ok(hex::encode(Sha256::digest(&bytes)))
}

fn entries(paths: &[PathBuf]) -> Result<Vec<FileEntry>, Failure> {
    paths
        .iter()
        .map(|p| {
            Ok(FileEntry {
                sha256: sha256_file(p)?,
                path: p.clone(),
            })
        })
        .collect()
}

/// `<primary>.manifest.json`.
pub fn manifest_path(primary: &Path) -> PathBuf {
    let mut name = primary.file_name().unwrap_or_default().to_os_string();
    name.push(".manifest.json");
    primary.with_file_name(name)
}

pub struct RunRecorder {
    pub subcommand: &'static str,
    pub seed: u64,
    pub threads: usize,
    pub started_at: String,
    pub inputs: Vec<PathBuf>,
    pub outputs: Vec<PathBuf>,
    pub config: serde_json::Value,
}

impl RunRecorder {
    pub fn new(subcommand: &'static str, seed: u64, threads: usize) -> Self {
        RunRecorder {
            subcommand,
            seed,
            threads,
            started_at: chrono::Utc::now().to_rfc3339(),
            inputs: Vec::new(),
            outputs: Vec::new(),
            config: serde_json::Value::Null,
        }
    }

    pub fn input(&mut self, p: &Path) {
        self.inputs.push(p.to_path_buf());
    }

    pub fn output(&mut self, p: &Path) {
        self.outputs.push(p.to_path_buf());
    }

    /// Writes the manifest beside the first output.
    pub fn finish(self) -> Result<PathBuf, Failure> {
        let primary = self
            .outputs
            .first()
            .cloned()
            .ok_or_else(|| Failure::invalid("run produced no outputs"))?;
        let manifest = RunManifest {
            subcommand: self.subcommand.to_string(),
            version: env!("CARGO_PKG_VERSION").to_string(),
            config: self.config,
            seed: self.seed,
            threads: self.threads,
            started_at: self.started_at,
            finished_at: chrono::Utc::now().to_rfc3339(),
            inputs: entries(&self.inputs)?,
            outputs: entries(&self.outputs)?,
        };
        let path = manifest_path(&primary);
        let text = serde_json::to_string_pretty(&manifest)?;
        std::fs::write(&path, text + "\n").map_err(|e| Failure::io(&path, e))?;
        Ok(path)
    }
}
