//! JSON parameter checkpoints.
//!
//! Values are written as shortest round-trip decimal strings (`{:e}`), so a
//! save/load cycle reproduces every `f64` bit pattern, including `-0.0`.

use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::{ParamSet, Tensor, TensorError};

pub const CHECKPOINT_SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum CheckpointError {
    #[error("checkpoint io: {0}")]
    Io(#[from] std::io::Error),
    #[error("checkpoint json: {0}")]
    Json(#[from] serde_json::Error),
    #[error("parameter `{name}`: bad value `{value}`")]
    BadValue { name: String, value: String },
    #[error("parameter `{0}`: {1}")]
    Shape(String, TensorError),
    #[error("unsupported checkpoint schema version {0}")]
    Version(u32),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParamEntry {
    pub name: String,
    pub shape: Vec<usize>,
    pub values: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Checkpoint {
    pub schema_version: u32,
    /// `transformer` or `blstm`.
    pub model_kind: String,
    /// Architecture config of the model that produced the parameters.
    pub config: serde_json::Value,
    /// Model-specific extras (e.g. the BLSTM word list).
    #[serde(default)]
    pub extra: serde_json::Value,
    pub params: Vec<ParamEntry>,
}

impl Checkpoint {
    pub fn from_params(model_kind: &str, config: serde_json::Value, params: &ParamSet) -> Self {
        Checkpoint {
            schema_version: CHECKPOINT_SCHEMA_VERSION,
            model_kind: model_kind.to_string(),
            config,
            extra: serde_json::Value::Null,
            params: params
                .iter()
                .map(|(name, t)| ParamEntry {
                    name: name.to_string(),
                    shape: t.shape().to_vec(),
                    values: t.data().iter().map(|v| format!("{v:e}")).collect(),
                })
                .collect(),
        }
    }

    pub fn to_params(&self) -> Result<ParamSet, CheckpointError> {
        let mut set = ParamSet::new();
        for entry in &self.params {
            let data = entry
                .values
                .iter()
                .map(|s| {
                    s.parse::<f64>().map_err(|_| CheckpointError::BadValue {
                        name: entry.name.clone(),
                        value: s.clone(),
                    })
                })
                .collect::<Result<Vec<_>, _>>()?;
            let t = Tensor::new(entry.shape.clone(), data)
                .map_err(|e| CheckpointError::Shape(entry.name.clone(), e))?;
            set.insert(entry.name.clone(), t);
        }
        Ok(set)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("checkpoint serializes")
    }

    pub fn from_json(text: &str) -> Result<Self, CheckpointError> {
        let ck: Checkpoint = serde_json::from_str(text)?;
        if ck.schema_version != CHECKPOINT_SCHEMA_VERSION {
            return Err(CheckpointError::Version(ck.schema_version));
        }
        Ok(ck)
    }

    pub fn save(&self, path: &Path) -> Result<(), CheckpointError> {
        if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
            std::fs::create_dir_all(dir)?;
        }
        std::fs::write(path, self.to_json())?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self, CheckpointError> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }
}
