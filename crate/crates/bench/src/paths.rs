//! Where relative paths in config files point.
//!
//! Outputs go under the output directory: `--out-dir`, else
//! `$SLABNOP_OUTPUT_DIR`, else the working directory. Inputs are looked up
//! next to the config file first and in the output directory second, so a
//! dataset written by `generate-data` is found by a `train` config that
//! names it relatively.

use std::path::{Path, PathBuf};

use serde::de::DeserializeOwned;

use crate::error::{config_err, Result};

pub const OUTPUT_DIR_ENV: &str = "SLABNOP_OUTPUT_DIR";

#[derive(Debug, Clone)]
pub struct Paths {
    pub config_dir: PathBuf,
    pub output_dir: PathBuf,
}

impl Paths {
    pub fn new(config_path: &Path, output_dir: PathBuf) -> Self {
        let config_dir = config_path
            .parent()
            .map(Path::to_path_buf)
            .unwrap_or_default();
        Self {
            config_dir,
            output_dir,
        }
    }

    pub fn output(&self, p: &Path) -> PathBuf {
        if p.is_absolute() {
            p.to_path_buf()
        } else {
            self.output_dir.join(p)
        }
    }

    pub fn input(&self, p: &Path) -> PathBuf {
        if p.is_absolute() {
            return p.to_path_buf();
        }
        let beside = self.config_dir.join(p);
        if beside.exists() {
            beside
        } else {
            let out = self.output_dir.join(p);
            if out.exists() {
                out
            } else {
                beside
            }
        }
    }
}

pub fn default_output_dir(flag: Option<&Path>) -> PathBuf {
    match flag {
        Some(p) => p.to_path_buf(),
        None => std::env::var_os(OUTPUT_DIR_ENV)
            .map(PathBuf::from)
            .unwrap_or_else(|| PathBuf::from(".")),
    }
}

/// Parses a JSON config; errors name the file, line and column.
pub fn read_json<T: DeserializeOwned>(path: &Path) -> Result<T> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| config_err(format!("{}: {e}", path.display())))?;
    serde_json::from_str(&text).map_err(|e| config_err(format!("{}: {e}", path.display())))
}
