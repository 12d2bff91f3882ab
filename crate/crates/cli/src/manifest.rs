use std::fs;
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use anyhow::{Context, Result};
use serde::Serialize;

use crate::config::Profile;

pub const MANIFEST_FILE: &str = "manifest.json";

/// Record of one invocation, written to the output directory before any
/// work starts. `files` lists every output the command writes, relative to
/// `out`.
#[derive(Debug, Clone, Serialize)]
pub struct RunManifest {
    pub command: String,
    pub config: Option<PathBuf>,
    pub out: PathBuf,
    pub seeds: Vec<u64>,
    pub profile: Profile,
    pub version: String,
    /// Seconds since the Unix epoch.
    pub started: u64,
    pub files: Vec<String>,
}

impl RunManifest {
    pub fn new(command: &str, config: Option<&Path>, out: &Path, profile: Profile) -> Self {
        RunManifest {
            command: command.into(),
            config: config.map(Path::to_path_buf),
            out: out.to_path_buf(),
            seeds: Vec::new(),
            profile,
            version: env!("CARGO_PKG_VERSION").into(),
            started: SystemTime::now()
                .duration_since(UNIX_EPOCH)
                .map_or(0, |d| d.as_secs()),
            files: Vec::new(),
        }
    }

    /// Creates the output directory and writes the manifest into it.
    pub fn write(&self) -> Result<()> {
        fs::create_dir_all(&self.out)
            .with_context(|| format!("creating {}", self.out.display()))?;
        let path = self.out.join(MANIFEST_FILE);
        fs::write(&path, serde_json::to_vec_pretty(self)?)
            .with_context(|| format!("writing {}", path.display()))
    }
}
