use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::Failure;

#[derive(Debug, Serialize)]
pub struct InputDigest {
    pub path: String,
    pub sha256: String,
}

/// Provenance record written next to every set of output files.
#[derive(Debug, Serialize)]
pub struct RunManifest {
    pub subcommand: String,
    pub tool_version: String,
    pub seed: Option<u64>,
    pub config: serde_json::Value,
    pub inputs: Vec<InputDigest>,
    pub outputs: Vec<String>,
    pub duration_seconds: f64,
}

/// Tracks the files a subcommand reads and writes.
pub struct Run {
    started: Instant,
    inputs: Vec<InputDigest>,
    outputs: Vec<String>,
}

impl Run {
    pub fn start() -> Self {
        Self {
            started: Instant::now(),
            inputs: Vec::new(),
            outputs: Vec::new(),
        }
    }

    pub fn read(&mut self, path: &Path) -> Result<String, Failure> {
        let bytes =
            fs::read(path).map_err(|e| Failure::input(format!("cannot read {}: {e}", path.display())))?;
        self.inputs.push(InputDigest {
            path: path.display().to_string(),
            sha256: hex::encode(Sha256::digest(&bytes)),
        });
        String::from_utf8(bytes).map_err(|_| Failure::input(format!("{} is not UTF-8", path.display())))
    }

    pub fn write(&mut self, path: &Path, contents: &str) -> Result<(), Failure> {
        if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
            fs::create_dir_all(parent)
                .map_err(|e| Failure::input(format!("cannot create {}: {e}", parent.display())))?;
        }
        fs::write(path, contents)
            .map_err(|e| Failure::input(format!("cannot write {}: {e}", path.display())))?;
        self.outputs.push(path.display().to_string());
        Ok(())
    }

    /// Writes the manifest. Skipped when nothing was written.
    pub fn finish(
        self,
        manifest_path: &Path,
        subcommand: &str,
        seed: Option<u64>,
        config: &impl Serialize,
    ) -> Result<(), Failure> {
        if self.outputs.is_empty() {
            return Ok(());
        }
        let manifest = RunManifest {
            subcommand: subcommand.to_owned(),
            tool_version: env!("CARGO_PKG_VERSION").to_owned(),
            seed,
            config: serde_json::to_value(config).map_err(|e| Failure::Internal(e.to_string()))?,
            inputs: self.inputs,
            outputs: self.outputs,
            duration_seconds: self.started.elapsed().as_secs_f64(),
        };
        let text = measdep::io::to_json(&manifest)?;
        fs::write(manifest_path, text)
            .map_err(|e| Failure::input(format!("cannot write {}: {e}", manifest_path.display())))
    }
}

/// `<path>.<suffix>`, keeping the original extension.
pub fn sibling(path: &Path, suffix: &str) -> PathBuf {
    let mut name = path.as_os_str().to_owned();
    name.push(".");
    name.push(suffix);
    PathBuf::from(name)
}
