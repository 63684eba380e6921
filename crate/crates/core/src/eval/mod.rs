//! Similarity and utility metrics between real and synthetic datasets.

mod amplitude;
mod pca;
mod tpd;
mod wasserstein;

pub use amplitude::{amplitude_awd, amplitude_ratios, estimate_amplitudes, known_frequencies, sine_mae};
pub use pca::{pca_2d, pca_2d_matrix, PcaProjection};
pub use tpd::{tpd, tpd_from_scores, TpdConfig, TpdReport, TpdTask};
pub use wasserstein::{awd, wd_1d, AwdReport};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::data::TimeSeriesDataset;

#[derive(Debug, Error)]
pub enum EvalError {
    #[error("invalid argument: {0}")]
    Argument(String),
    #[error("shape mismatch: {0}")]
    Shape(String),
    #[error(transparent)]
    Nn(#[from] crate::nn::NnError),
}

pub type Result<T> = std::result::Result<T, EvalError>;

/// One named metric value with an optional breakdown.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricReport {
    pub metric: String,
    pub value: f64,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub breakdown: Vec<(String, f64)>,
    #[serde(default, skip_serializing_if = "serde_json::Value::is_null")]
    pub config: serde_json::Value,
}

impl MetricReport {
    pub fn scalar(metric: &str, value: f64) -> Self {
        Self { metric: metric.into(), value, breakdown: Vec::new(), config: serde_json::Value::Null }
    }
}

/// Checkpoint-selection score: amplitude-AWD when both datasets are sine
/// series with known frequencies, per-cell AWD otherwise.
pub fn selection_metric(real: &TimeSeriesDataset, synth: &TimeSeriesDataset) -> Result<f64> {
    match real.frequencies() {
        Some(f) => amplitude_awd(real, synth, f),
        None => Ok(awd(real, synth)?.value),
    }
}
