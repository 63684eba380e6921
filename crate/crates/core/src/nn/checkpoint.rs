//! Self-describing JSON checkpoints for [`MlpModel`].
//!
//! Values are stored as `f64` and parsed with round-trip-exact float parsing,
//! so save∘load is bit-exact for both `f32` and `f64` models.

use ndarray::{Array1, Array2};
use serde::{Deserialize, Serialize};

use super::activation::Activation;
use super::error::{NnError, Result};
use super::model::{Layer, MlpModel};
use crate::scalar::Scalar;

pub const FORMAT_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LayerRecord {
    pub inputs: usize,
    pub outputs: usize,
    pub activation: Activation,
    /// Row-major `(outputs, inputs)`.
    pub weight: Vec<f64>,
    pub bias: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelRecord {
    pub format_version: u32,
    pub scalar: String,
    pub layers: Vec<LayerRecord>,
}

impl<T: Scalar> MlpModel<T> {
    pub fn to_record(&self) -> ModelRecord {
        ModelRecord {
            format_version: FORMAT_VERSION,
            scalar: T::TAG.to_string(),
            layers: self
                .layers()
                .iter()
                .map(|l| LayerRecord {
                    inputs: l.inputs(),
                    outputs: l.outputs(),
                    activation: l.activation,
                    weight: l.weight.iter().map(|v| v.as_f64()).collect(),
                    bias: l.bias.iter().map(|v| v.as_f64()).collect(),
                })
                .collect(),
        }
    }

    pub fn from_record(record: &ModelRecord) -> Result<Self> {
        if record.format_version != FORMAT_VERSION {
            return Err(NnError::Checkpoint(format!(
                "unsupported format version {} (expected {FORMAT_VERSION})",
                record.format_version
            )));
        }
        if record.scalar != T::TAG {
            return Err(NnError::Checkpoint(format!(
                "checkpoint holds {} parameters, requested {}",
                record.scalar,
                T::TAG
            )));
        }
        let layers = record
            .layers
            .iter()
            .map(|l| {
                let weight = Array2::from_shape_vec((l.outputs, l.inputs), l.weight.iter().map(|&v| T::from_f64_lossy(v)).collect())
                    .map_err(|e| NnError::Checkpoint(format!("weight shape: {e}")))?;
                if l.bias.len() != l.outputs {
                    return Err(NnError::Checkpoint("bias length mismatch".into()));
                }
                let bias = Array1::from_iter(l.bias.iter().map(|&v| T::from_f64_lossy(v)));
                Layer::new(weight, bias, l.activation)
            })
            .collect::<Result<Vec<_>>>()?;
        MlpModel::from_layers(layers)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(&self.to_record()).expect("model record serializes")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let record: ModelRecord = serde_json::from_str(text).map_err(|e| NnError::Checkpoint(e.to_string()))?;
        Self::from_record(&record)
    }
}
