use std::fs;
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use anyhow::Context;
use drwr::FitConfig;
use serde::{Deserialize, Serialize};

pub const FILE_NAME: &str = "manifest.json";

/// Record of one command invocation, written next to its outputs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub tool: String,
    pub version: String,
    pub command: String,
    pub scene: Option<PathBuf>,
    pub data_dir: Option<PathBuf>,
    pub output_dir: PathBuf,
    pub seed: u64,
    /// Point count for fits.
    pub points: Option<usize>,
    /// View count for fits, when restricted.
    pub views: Option<usize>,
    pub fit_config: Option<FitConfig>,
    pub started_unix_ms: u128,
    pub finished_unix_ms: Option<u128>,
}

pub fn now_ms() -> u128 {
    SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map(|d| d.as_millis())
        .unwrap_or(0)
}

impl RunManifest {
    pub fn new(command: &str, output_dir: &Path, seed: u64) -> Self {
        Self {
            tool: "drwr".into(),
            version: env!("CARGO_PKG_VERSION").into(),
            command: command.into(),
            scene: None,
            data_dir: None,
            output_dir: output_dir.to_path_buf(),
            seed,
            points: None,
            views: None,
            fit_config: None,
            started_unix_ms: now_ms(),
            finished_unix_ms: None,
        }
    }

    pub fn finish(&mut self) {
        self.finished_unix_ms = Some(now_ms());
    }

    pub fn write(&self, dir: &Path) -> anyhow::Result<()> {
        let path = dir.join(FILE_NAME);
        fs::write(&path, serde_json::to_string_pretty(self)?)
            .with_context(|| format!("writing {}", path.display()))
    }

    pub fn read(path: &Path) -> anyhow::Result<Self> {
        let text =
            fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        serde_json::from_str(&text)
            .map_err(|e| drwr::Error::Parse(format!("{}: {e}", path.display())).into())
    }
}
