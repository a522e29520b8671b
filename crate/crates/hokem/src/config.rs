//! One declarative configuration file for the whole pipeline, with full
//! defaults, so an empty `{}` is a valid config. The file path comes from
//! an explicit argument, the `HOKEM_CONFIG` environment variable, or the
//! defaults — in that order.

use serde::{Deserialize, Serialize};
use std::path::{Path, PathBuf};

use crate::error::Result;
use crate::evaluation::Scenario;
use crate::hograph::GraphConfig;
use crate::network::ModelConfig;
use crate::training::TrainConfig;

pub const CONFIG_ENV_VAR: &str = "HOKEM_CONFIG";

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PathsConfig {
    pub dataset_dir: PathBuf,
    pub checkpoint_dir: PathBuf,
    pub report_dir: PathBuf,
}

impl Default for PathsConfig {
    fn default() -> Self {
        PathsConfig {
            dataset_dir: PathBuf::from("data"),
            checkpoint_dir: PathBuf::from("checkpoints"),
            report_dir: PathBuf::from("reports"),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PipelineConfig {
    pub paths: PathsConfig,
    pub graph: GraphConfig,
    /// Degree-regularization constant for adjacency normalization.
    pub beta: f64,
    pub model: ModelConfig,
    pub train: TrainConfig,
    pub scenario: Scenario,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        PipelineConfig {
            paths: PathsConfig::default(),
            graph: GraphConfig::default(),
            beta: 0.001,
            model: ModelConfig::default(),
            train: TrainConfig::default(),
            scenario: Scenario::One,
        }
    }
}

impl PipelineConfig {
    pub fn from_file(path: &Path) -> Result<Self> {
        Ok(serde_json::from_str(&std::fs::read_to_string(path)?)?)
    }

    /// Explicit path, else `HOKEM_CONFIG`, else built-in defaults. Returns
    /// the source path when a file was read.
    pub fn load(explicit: Option<&Path>) -> Result<(Self, Option<PathBuf>)> {
        if let Some(path) = explicit {
            return Ok((Self::from_file(path)?, Some(path.to_path_buf())));
        }
        if let Some(env_path) = std::env::var_os(CONFIG_ENV_VAR) {
            let path = PathBuf::from(env_path);
            return Ok((Self::from_file(&path)?, Some(path)));
        }
        Ok((Self::default(), None))
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }
}
