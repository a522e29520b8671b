//! Model persistence: `manifest.json` describing the architecture and the
//! parameter layout, plus `params.bin` holding every tensor's values as
//! little-endian f64 in layout order (row-major within each tensor).
//! Round trips are bit-exact because floats never pass through text.

use serde::{Deserialize, Serialize};
use std::path::Path;

use crate::error::{HokemError, Result};
use crate::hograph::{build_graph, AdjacencyStack, GraphConfig};
use crate::network::{Model, ModelConfig, ParamSpec};
use crate::tensor::Tensor;

pub const MANIFEST_FILE: &str = "manifest.json";
pub const PARAMS_FILE: &str = "params.bin";
pub const CHECKPOINT_VERSION: u32 = 1;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CheckpointManifest {
    pub format_version: u32,
    pub model: ModelConfig,
    pub graph: GraphConfig,
    pub beta: f64,
    pub feature_dim: usize,
    pub class_names: Vec<String>,
    /// Serialization order of `params.bin`.
    pub params: Vec<ParamSpec>,
    pub param_bytes: u64,
}

/// Writes `manifest.json` and `params.bin` into `dir` (created if absent).
pub fn save_checkpoint(
    dir: &Path,
    model: &Model,
    graph: &GraphConfig,
    class_names: &[String],
) -> Result<()> {
    std::fs::create_dir_all(dir)?;
    let manifest = CheckpointManifest {
        format_version: CHECKPOINT_VERSION,
        model: model.config().clone(),
        graph: graph.clone(),
        beta: model.stack().beta(),
        feature_dim: model.feature_dim(),
        class_names: class_names.to_vec(),
        params: model.param_layout().to_vec(),
        param_bytes: 8 * model.param_count() as u64,
    };
    let json = serde_json::to_string_pretty(&manifest)?;
    std::fs::write(dir.join(MANIFEST_FILE), json + "\n")?;

    let mut bytes = Vec::with_capacity(8 * model.param_count());
    for tensor in model.params() {
        for &v in tensor.data() {
            bytes.extend_from_slice(&v.to_le_bytes());
        }
    }
    std::fs::write(dir.join(PARAMS_FILE), bytes)?;
    Ok(())
}

/// Rebuilds the model described in `dir`, restoring parameters exactly.
pub fn load_checkpoint(dir: &Path) -> Result<(Model, GraphConfig, Vec<String>)> {
    let manifest: CheckpointManifest =
        serde_json::from_str(&std::fs::read_to_string(dir.join(MANIFEST_FILE))?)?;
    if manifest.format_version != CHECKPOINT_VERSION {
        return Err(HokemError::Schema {
            pointer: "/format_version".into(),
            message: format!(
                "unsupported checkpoint version {} (expected {CHECKPOINT_VERSION})",
                manifest.format_version
            ),
        });
    }
    let stack = AdjacencyStack::from_graph(&build_graph(&manifest.graph)?, manifest.beta)?;
    let mut model = Model::new(manifest.model.clone(), stack, manifest.feature_dim)?;
    if model.param_layout() != manifest.params.as_slice() {
        return Err(HokemError::Schema {
            pointer: "/params".into(),
            message: "manifest layout does not match the rebuilt architecture".into(),
        });
    }

    let bytes = std::fs::read(dir.join(PARAMS_FILE))?;
    if bytes.len() as u64 != manifest.param_bytes || bytes.len() % 8 != 0 {
        return Err(HokemError::Schema {
            pointer: "/param_bytes".into(),
            message: format!(
                "parameter file holds {} bytes, manifest expects {}",
                bytes.len(),
                manifest.param_bytes
            ),
        });
    }
    let mut values = bytes
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().expect("chunks are 8 bytes")));
    let mut params = Vec::with_capacity(manifest.params.len());
    for spec in &manifest.params {
        let data: Vec<f64> = values.by_ref().take(spec.rows * spec.cols).collect();
        if data.len() != spec.rows * spec.cols {
            return Err(HokemError::Schema {
                pointer: "/params".into(),
                message: format!("parameter file truncated inside {}", spec.name),
            });
        }
        params.push(Tensor::new(spec.rows, spec.cols, data));
    }
    model.set_params(params)?;
    Ok((model, manifest.graph, manifest.class_names))
}
