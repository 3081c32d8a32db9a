use std::path::Path;

use serde::{Deserialize, Serialize};

use super::tensor::{Tensor, TensorData};
use crate::network::ModelConfig;
use crate::{Error, Model, Result};

pub const CHECKPOINT_META: &str = "checkpoint.json";
pub const CHECKPOINT_PARAMS: &str = "params.rvt";

/// Metadata stored next to the parameter tensor.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CheckpointMeta {
    pub config_hash: String,
    pub model: ModelConfig,
    pub param_count: usize,
    pub best_epoch: Option<usize>,
    pub epochs_run: usize,
    pub diverged: Option<String>,
}

/// Writes `dir/checkpoint.json` and `dir/params.rvt` (flat f64 parameters).
pub fn save_checkpoint(dir: &Path, model: &Model, meta: &CheckpointMeta) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let params = Tensor::new(vec![model.param_count()], TensorData::F64(model.params.clone()))?;
    params.write(&dir.join(CHECKPOINT_PARAMS))?;
    let path = dir.join(CHECKPOINT_META);
    std::fs::write(&path, serde_json::to_string_pretty(meta)? + "\n").map_err(|e| Error::io(&path, e))
}

pub fn load_checkpoint(dir: &Path) -> Result<(Model, CheckpointMeta)> {
    let path = dir.join(CHECKPOINT_META);
    let text = std::fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?;
    let meta: CheckpointMeta =
        serde_json::from_str(&text).map_err(|e| Error::Format(format!("{}: {e}", path.display())))?;
    let mut model = Model::zeros(meta.model.clone())?;
    let t = Tensor::read(&dir.join(CHECKPOINT_PARAMS))?;
    let TensorData::F64(flat) = t.data else {
        return Err(Error::Format("checkpoint parameters must be f64".into()));
    };
    if meta.param_count != flat.len() {
        return Err(Error::Format(format!(
            "checkpoint declares {} parameters but stores {}",
            meta.param_count,
            flat.len()
        )));
    }
    model.set_flat(&flat)?;
    Ok((model, meta))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trip_is_exact() {
        let dir = tempfile::tempdir().unwrap();
        let model = Model::new(ModelConfig { init_seed: 4, ..ModelConfig::default() }).unwrap();
        let meta = CheckpointMeta {
            config_hash: "ab".into(),
            model: model.config.clone(),
            param_count: model.param_count(),
            best_epoch: Some(2),
            epochs_run: 3,
            diverged: None,
        };
        save_checkpoint(dir.path(), &model, &meta).unwrap();
        let (back, m) = load_checkpoint(dir.path()).unwrap();
        assert_eq!(back, model);
        assert_eq!(m, meta);
    }

    #[test]
    fn mismatched_parameter_count_is_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let model = Model::new(ModelConfig::default()).unwrap();
        let meta = CheckpointMeta {
            config_hash: String::new(),
            model: model.config.clone(),
            param_count: 3,
            best_epoch: None,
            epochs_run: 0,
            diverged: None,
        };
        save_checkpoint(dir.path(), &model, &meta).unwrap();
        assert!(matches!(load_checkpoint(dir.path()), Err(Error::Format(_))));
    }
}
