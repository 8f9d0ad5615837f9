use std::fs;
use std::path::{Path, PathBuf};

use focusmix::{ChainOptions, Error, ModelConfig, Result, StudyConfig};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

/// Configuration file for `impute`, `ppc`, `pool` and `validate`.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub model: ModelConfig,
    /// The seed here is replaced by `--seed`.
    pub chain: ChainOptions,
    /// Cells pooled by `pool`; every marginal when empty.
    pub cells: Vec<String>,
    pub level: Option<f64>,
    pub ppc: PpcConfig,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PpcConfig {
    pub replicates: usize,
    /// Statistics as cell strings; focus marginals and pairs when empty.
    pub statistics: Vec<String>,
}

impl Default for PpcConfig {
    fn default() -> Self {
        Self { replicates: focusmix::ppc::DEFAULT_REPLICATES, statistics: Vec::new() }
    }
}

pub const DEFAULT_LEVEL: f64 = 0.95;

pub fn read_json<T: DeserializeOwned>(path: &Path) -> Result<T> {
    let text =
        fs::read_to_string(path).map_err(|e| Error::InvalidArgument(format!("cannot read {}: {e}", path.display())))?;
    serde_json::from_str(&text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))
}

pub fn load_run_config(path: Option<&Path>) -> Result<RunConfig> {
    path.map_or_else(|| Ok(RunConfig::default()), read_json)
}

pub fn load_study_config(path: Option<&Path>) -> Result<StudyConfig> {
    path.map_or_else(|| Ok(StudyConfig::default()), read_json)
}

/// Everything needed to reproduce a run.
#[derive(Debug, Serialize)]
pub struct Manifest<'a, C: Serialize> {
    pub tool: &'static str,
    pub version: &'static str,
    pub command: &'static str,
    pub seed: Option<u64>,
    pub inputs: Vec<PathBuf>,
    pub config: &'a C,
    pub outputs: Vec<String>,
}

impl<'a, C: Serialize> Manifest<'a, C> {
    pub fn new(command: &'static str, seed: Option<u64>, inputs: Vec<PathBuf>, config: &'a C) -> Self {
        Self {
            tool: "focusmix",
            version: env!("CARGO_PKG_VERSION"),
            command,
            seed,
            inputs,
            config,
            outputs: Vec::new(),
        }
    }

    pub fn write(&self, dir: &Path) -> Result<()> {
        write_bytes(&dir.join("manifest.json"), &serde_json::to_vec_pretty(self)?)
    }
}

pub fn write_bytes(path: &Path, bytes: &[u8]) -> Result<()> {
    fs::write(path, bytes).map_err(|e| Error::Io { path: path.to_path_buf(), source: e })
}

pub fn create_dir(path: &Path) -> Result<()> {
    fs::create_dir_all(path).map_err(|e| Error::Io { path: path.to_path_buf(), source: e })
}
