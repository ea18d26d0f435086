//! Run directories, artifact files and the manifest.

use std::fs;
use std::path::{Path, PathBuf};

use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::config::ExperimentConfig;
use crate::error::CliError;

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Manifest {
    pub command: String,
    pub config_hash: String,
    pub seed: u64,
    pub artifacts: Vec<String>,
    pub version: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub input_hash: Option<String>,
}

/// SHA-256 over the canonical JSON form of the resolved configuration.
pub fn config_hash(cfg: &ExperimentConfig) -> Result<String, CliError> {
    let canonical = serde_json::to_string(cfg)?;
    Ok(sha256_hex(canonical.as_bytes()))
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

/// Collects the files of one run under `<output_dir>/<command>-<hash prefix>`.
pub struct RunDir {
    dir: PathBuf,
    manifest: Manifest,
}

impl RunDir {
    pub fn create(cfg: &ExperimentConfig, command: &str) -> Result<Self, CliError> {
        let hash = config_hash(cfg)?;
        let dir = Path::new(&cfg.run.output_dir).join(format!("{command}-{}", &hash[..12]));
        fs::create_dir_all(&dir).map_err(|e| CliError::Io(format!("{}: {e}", dir.display())))?;
        Ok(Self {
            dir,
            manifest: Manifest {
                command: command.to_string(),
                config_hash: hash,
                seed: cfg.run.seed,
                artifacts: Vec::new(),
                version: env!("CARGO_PKG_VERSION").to_string(),
                input_hash: None,
            },
        })
    }

    pub fn path(&self) -> &Path {
        &self.dir
    }

    pub fn set_input_hash(&mut self, hash: String) {
        self.manifest.input_hash = Some(hash);
    }

    pub fn write_text(&mut self, name: &str, text: &str) -> Result<(), CliError> {
        let path = self.dir.join(name);
        fs::write(&path, text).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?;
        self.manifest.artifacts.push(name.to_string());
        Ok(())
    }

    pub fn write_json<T: Serialize>(&mut self, name: &str, value: &T) -> Result<(), CliError> {
        let mut text = serde_json::to_string_pretty(value)?;
        text.push('\n');
        self.write_text(name, &text)
    }

    /// Writes `manifest.json` and returns the manifest.
    pub fn finish(self) -> Result<(PathBuf, Manifest), CliError> {
        let mut text = serde_json::to_string_pretty(&self.manifest)?;
        text.push('\n');
        let path = self.dir.join("manifest.json");
        fs::write(&path, text).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?;
        Ok((self.dir, self.manifest))
    }
}

/// Header line followed by rows of `{:.16e}` numbers.
pub fn numeric_csv(header: &[&str], rows: impl IntoIterator<Item = Vec<f64>>) -> String {
    let mut s = header.join(",");
    s.push('\n');
    for row in rows {
        let cells: Vec<String> = row.iter().map(|v| format!("{v:.16e}")).collect();
        s.push_str(&cells.join(","));
        s.push('\n');
    }
    s
}
