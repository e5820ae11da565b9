//! Versioned JSON model files.

use std::path::Path;

use serde::{Deserialize, Serialize};

use super::model::{Hyper, Model, ModelSpec};
use super::params::{ParameterSet, TensorInfo};
use crate::error::{Error, Result};

pub const FORMAT: &str = "esdnn-model";
pub const VERSION: u32 = 1;

/// How the training rows were produced, so evaluation can rebuild them.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DataConfig {
    pub target: String,
    pub window: usize,
    pub current_covariates: bool,
    pub train_fraction: f64,
    pub interval_seconds: i64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StoredTensor {
    pub name: String,
    pub shape: Vec<usize>,
    pub trainable: bool,
    pub values: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelFile {
    pub format: String,
    pub version: u32,
    pub spec: ModelSpec,
    pub hyper: Hyper,
    pub seed: u64,
    /// Path of the paired scaler file, relative to the model file.
    pub scaler: Option<String>,
    pub data: Option<DataConfig>,
    pub tensors: Vec<StoredTensor>,
}

impl ModelFile {
    pub fn new(model: &Model, hyper: &Hyper, params: &ParameterSet, seed: u64) -> Self {
        let tensors = params
            .layout
            .iter()
            .map(|t| StoredTensor {
                name: t.name.clone(),
                shape: t.shape.clone(),
                trainable: t.trainable,
                values: params.values[t.range()].to_vec(),
            })
            .collect();
        ModelFile {
            format: FORMAT.into(),
            version: VERSION,
            spec: model.spec().clone(),
            hyper: *hyper,
            seed,
            scaler: None,
            data: None,
            tensors,
        }
    }

    /// Rebuilds the model and its parameters (optimizer moments start at zero).
    pub fn restore(&self) -> Result<(Model, ParameterSet)> {
        let model = Model::new(self.spec.clone())?;
        let expected = model.layout(true);
        if expected.len() != self.tensors.len() {
            return Err(self.bad(format!("expected {} tensors, found {}", expected.len(), self.tensors.len())));
        }
        let mut layout = Vec::with_capacity(expected.len());
        let mut values = Vec::with_capacity(model.param_count());
        for (want, got) in expected.iter().zip(&self.tensors) {
            if want.name != got.name || want.shape != got.shape || got.values.len() != want.len() {
                return Err(self.bad(format!("tensor '{}' {:?} does not match spec ({} {:?})", got.name, got.shape, want.name, want.shape)));
            }
            if got.values.iter().any(|v| !v.is_finite()) {
                return Err(self.bad(format!("tensor '{}' holds non-finite values", got.name)));
            }
            layout.push(TensorInfo {
                trainable: got.trainable,
                ..want.clone()
            });
            values.extend_from_slice(&got.values);
        }
        Ok((model, ParameterSet::new(layout, values)?))
    }

    fn bad(&self, message: String) -> Error {
        Error::Format { what: "model file", message }
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("model file serializes");
        s.push('\n');
        s
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let f: ModelFile = serde_json::from_str(text).map_err(|e| Error::Format {
            what: "model file",
            message: e.to_string(),
        })?;
        if f.format != FORMAT || f.version != VERSION {
            return Err(f.bad(format!("unsupported format {} v{}", f.format, f.version)));
        }
        Ok(f)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_json()).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json(&text)
    }
}
