use std::path::{Path, PathBuf};

use foldcap::config::ToolConfig;
use foldcap::io_util::write_atomic;
use serde::Serialize;

/// Record of one invocation; `argv` plus `config` re-run it.
#[derive(Debug, Serialize)]
pub struct RunManifest {
    pub command: String,
    pub argv: Vec<String>,
    /// Effective configuration after flag overrides.
    pub config: ToolConfig,
    pub seed: Option<u64>,
    pub inputs: Vec<PathBuf>,
    pub outputs: Vec<PathBuf>,
    pub tool_version: String,
    pub wall_time_s: f64,
    pub exit_code: u8,
    pub error: Option<String>,
}

impl RunManifest {
    pub fn write(&self, path: &Path) -> std::io::Result<()> {
        let bytes = serde_json::to_vec_pretty(self).map_err(std::io::Error::other)?;
        write_atomic(path, &bytes)
    }
}
