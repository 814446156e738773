//! Run manifests: the resolved configuration, input hashes and artifact list
//! of one invocation. Passing a manifest back through `--config` replays the run.

use std::fs;
use std::path::{Path, PathBuf};

use chrono::{SecondsFormat, Utc};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{CliError, CliResult};

pub const MANIFEST_FILE: &str = "manifest.json";

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct InputHash {
    pub path: PathBuf,
    pub sha256: String,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunManifest {
    pub subcommand: String,
    pub version: String,
    pub config: serde_json::Value,
    pub inputs: Vec<InputHash>,
    pub seed: Option<u64>,
    pub artifacts: Vec<String>,
    pub started_at: String,
    pub finished_at: String,
}

pub fn now() -> String {
    Utc::now().to_rfc3339_opts(SecondsFormat::Millis, true)
}

pub fn hash_file(path: &Path) -> CliResult<InputHash> {
    let bytes = fs::read(path).map_err(CliError::io(path))?;
    Ok(InputHash {
        path: path.to_path_buf(),
        sha256: hex::encode(Sha256::digest(&bytes)),
    })
}

/// Collects artifacts for an optional output directory. Without a
/// directory nothing is written.
pub struct Artifacts {
    dir: Option<PathBuf>,
    written: Vec<String>,
}

impl Artifacts {
    pub fn new(dir: Option<&Path>) -> CliResult<Self> {
        if let Some(d) = dir {
            fs::create_dir_all(d).map_err(CliError::io(d))?;
        }
        Ok(Self {
            dir: dir.map(Path::to_path_buf),
            written: Vec::new(),
        })
    }

    pub fn write(&mut self, name: &str, contents: &str) -> CliResult<()> {
        if let Some(d) = &self.dir {
            let path = d.join(name);
            fs::write(&path, contents).map_err(CliError::io(&path))?;
            self.written.push(name.to_string());
        }
        Ok(())
    }

    pub fn finish(
        self,
        subcommand: &str,
        config: &impl Serialize,
        inputs: &[&Path],
        seed: Option<u64>,
        started_at: String,
    ) -> CliResult<()> {
        let Some(dir) = &self.dir else {
            return Ok(());
        };
        let manifest = RunManifest {
            subcommand: subcommand.to_string(),
            version: env!("CARGO_PKG_VERSION").to_string(),
            config: serde_json::to_value(config).expect("configs serialize"),
            inputs: inputs.iter().map(|p| hash_file(p)).collect::<CliResult<_>>()?,
            seed,
            artifacts: self.written.clone(),
            started_at,
            finished_at: now(),
        };
        let path = dir.join(MANIFEST_FILE);
        let text = serde_json::to_string_pretty(&manifest).expect("manifest serializes");
        fs::write(&path, text + "\n").map_err(CliError::io(&path))
    }
}
