use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::{CliError, RunConfig};

pub const MANIFEST: &str = "manifest.json";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Stage {
    pub name: String,
    pub outputs: Vec<String>,
    pub elapsed_secs: f64,
    pub complete: bool,
}

/// Record of a run directory: the configuration that produced it and the
/// stages run so far.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub config_hash: String,
    pub config: RunConfig,
    pub tool_version: String,
    pub stages: Vec<Stage>,
    /// Checkpoint of an unfinished sweep, relative to the run directory.
    pub partial: Option<String>,
    pub complete: bool,
}

impl RunManifest {
    pub fn new(cfg: &RunConfig) -> Self {
        Self {
            config_hash: cfg.hash(),
            config: cfg.clone(),
            tool_version: env!("CARGO_PKG_VERSION").to_string(),
            stages: Vec::new(),
            partial: None,
            complete: true,
        }
    }

    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = fs::read_to_string(path).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
        serde_json::from_str(&text).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))
    }

    /// Manifest and the configuration recorded in it. `path` may name the
    /// manifest or its run directory.
    pub fn load_with_config(path: &Path) -> Result<(Self, RunConfig), CliError> {
        let path = if path.is_dir() {
            path.join(MANIFEST)
        } else {
            path.to_path_buf()
        };
        let m = Self::load(&path)?;
        if m.config.hash() != m.config_hash {
            return Err(CliError::Config(format!("{}: config hash mismatch", path.display())));
        }
        let cfg = m.config.clone();
        Ok((m, cfg))
    }

    /// Existing manifest of the same configuration in `dir`, or a fresh one.
    pub fn load_or_new(dir: &Path, cfg: &RunConfig) -> Result<Self, CliError> {
        let path = dir.join(MANIFEST);
        if path.exists() {
            if let Ok(m) = Self::load(&path) {
                if m.config_hash == cfg.hash() {
                    return Ok(m);
                }
            }
        }
        Ok(Self::new(cfg))
    }

    pub fn record(&mut self, name: &str, outputs: Vec<String>, elapsed_secs: f64, complete: bool) {
        self.stages.retain(|s| s.name != name);
        self.stages.push(Stage {
            name: name.to_string(),
            outputs,
            elapsed_secs,
            complete,
        });
        self.complete = self.stages.iter().all(|s| s.complete);
    }

    pub fn save(&mut self, dir: &Path, cfg: &RunConfig) -> Result<(), CliError> {
        self.config_hash = cfg.hash();
        self.config = cfg.clone();
        let text = serde_json::to_string_pretty(self).map_err(|e| CliError::Other(e.to_string()))?;
        fs::write(dir.join(MANIFEST), text + "\n")?;
        Ok(())
    }
}
