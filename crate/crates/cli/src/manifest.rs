//! `manifest.json`: what a run read, how it was configured and what it
//! wrote. Timings are the only field expected to change between reruns.

use std::path::{Path, PathBuf};
use std::time::Instant;

use anyhow::{Context, Result};
use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::config::PipelineConfig;

pub const MANIFEST_NAME: &str = "manifest.json";

#[derive(Debug, Clone, Serialize)]
pub struct FileDigest {
    pub name: String,
    pub bytes: u64,
    pub sha256: String,
}

impl FileDigest {
    pub fn of_bytes(name: String, data: &[u8]) -> Self {
        Self {
            name,
            bytes: data.len() as u64,
            sha256: hex::encode(Sha256::digest(data)),
        }
    }

    pub fn of_file(path: &Path) -> Result<Self> {
        let data = std::fs::read(path).with_context(|| format!("reading {}", path.display()))?;
        Ok(Self::of_bytes(display_name(path), &data))
    }
}

/// Inputs are listed by file name only so that the manifest does not
/// depend on where the data happens to live.
pub fn display_name(path: &Path) -> String {
    path.file_name()
        .map(|n| n.to_string_lossy().into_owned())
        .unwrap_or_else(|| path.display().to_string())
}

#[derive(Debug, Clone, Serialize)]
pub struct StageTiming {
    pub stage: String,
    pub millis: f64,
}

#[derive(Debug, Serialize)]
pub struct RunManifest {
    pub tool: &'static str,
    pub version: &'static str,
    pub command: String,
    pub config: PipelineConfig,
    pub inputs: Vec<FileDigest>,
    pub outputs: Vec<FileDigest>,
    pub timing: Vec<StageTiming>,
}

/// Collects inputs, outputs and stage timings while a command runs.
pub struct Recorder {
    out_dir: PathBuf,
    manifest: RunManifest,
}

impl Recorder {
    pub fn new(command: &str, config: &PipelineConfig, out_dir: &Path) -> Self {
        Self {
            out_dir: out_dir.to_path_buf(),
            manifest: RunManifest {
                tool: "seizure",
                version: env!("CARGO_PKG_VERSION"),
                command: command.to_string(),
                config: config.clone(),
                inputs: Vec::new(),
                outputs: Vec::new(),
                timing: Vec::new(),
            },
        }
    }

    pub fn input(&mut self, path: &Path) -> Result<()> {
        self.manifest.inputs.push(FileDigest::of_file(path)?);
        Ok(())
    }

    pub fn time<T>(&mut self, stage: impl Into<String>, f: impl FnOnce() -> T) -> T {
        let t0 = Instant::now();
        let v = f();
        self.manifest.timing.push(StageTiming {
            stage: stage.into(),
            millis: t0.elapsed().as_secs_f64() * 1e3,
        });
        v
    }

    /// Writes `contents` to `<out>/<name>` and records its digest.
    pub fn write(&mut self, name: &str, contents: &str) -> Result<PathBuf> {
        std::fs::create_dir_all(&self.out_dir).with_context(|| format!("creating {}", self.out_dir.display()))?;
        let path = self.out_dir.join(name);
        std::fs::write(&path, contents).with_context(|| format!("writing {}", path.display()))?;
        self.manifest
            .outputs
            .push(FileDigest::of_bytes(name.to_string(), contents.as_bytes()));
        Ok(path)
    }

    pub fn finish(self) -> Result<PathBuf> {
        std::fs::create_dir_all(&self.out_dir)?;
        let path = self.out_dir.join(MANIFEST_NAME);
        let mut text = serde_json::to_string_pretty(&self.manifest)?;
        text.push('\n');
        std::fs::write(&path, text).with_context(|| format!("writing {}", path.display()))?;
        Ok(path)
    }
}
