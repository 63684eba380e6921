use std::fmt::Write as _;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use tsfed_core::accountant::{CurveKind, DpGuarantee, PrivacyBudget, PrivacyReport};
use tsfed_core::data::DatasetMeta;

/// Everything needed to rerun a command, together with the config copy that
/// sits next to it. Holds no timestamps or host details so identical runs
/// produce identical files.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub tool: String,
    pub version: String,
    pub command: String,
    pub config_file: String,
    pub config_sha256: String,
    pub seeds: Seeds,
    pub dataset: DatasetMeta,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub privacy: Option<PrivacyRecord>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub training: Option<TrainingRecord>,
    pub outputs: Vec<String>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Seeds {
    pub dataset: u64,
    pub train: u64,
    pub eval: u64,
    pub audit: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PrivacyRecord {
    pub clip: f64,
    pub sigma: f64,
    pub sampling_rate: f64,
    /// `T_max`.
    pub steps: u64,
    /// Set when σ came from calibrating against a budget.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub budget: Option<PrivacyBudget>,
    /// Guarantee on the calibration curve, when calibrated.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub achieved: Option<DpGuarantee>,
    pub curve: CurveKind,
    /// Both curves and both threat surfaces, when a δ is known.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub report: Option<PrivacyReport>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainingRecord {
    pub score_metric: String,
    pub initial_score: f64,
    pub best_iteration: usize,
    pub best_score: f64,
    pub iterations_run: usize,
    pub messages: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub diverged: Option<String>,
}

pub(crate) fn sha256_hex(bytes: &[u8]) -> String {
    let digest = Sha256::digest(bytes);
    let mut out = String::with_capacity(64);
    for b in digest.iter() {
        let _ = write!(out, "{b:02x}");
    }
    out
}

impl Manifest {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("manifest serializes")
    }

    pub fn from_json(text: &str) -> serde_json::Result<Self> {
        serde_json::from_str(text)
    }
}
