//! Experiment configuration: one TOML file with a section per pipeline stage.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use tsfed_core::accountant::{CurveKind, PrivacyBudget};
use tsfed_core::audit::{AuditConfig, Release};
use tsfed_core::data::{Assignment, SineParams};
use tsfed_core::eval::{TpdConfig, TpdTask};
use tsfed_core::vfl::TrainConfig;

use crate::CliError;

/// Environment variable that relocates relative output directories.
pub const OUTPUT_ROOT_VAR: &str = "TSFED_OUTPUT_ROOT";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub dataset: DatasetSection,
    #[serde(default)]
    pub train: TrainConfig,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dp: Option<DpSection>,
    #[serde(default)]
    pub eval: EvalSection,
    #[serde(default)]
    pub audit: AuditSection,
    #[serde(default)]
    pub output: OutputSection,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DatasetKind {
    Sine2,
    Sine6,
    Csv,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DatasetSection {
    pub kind: DatasetKind,
    /// Required: nothing in the pipeline falls back to wall-clock seeding.
    pub seed: u64,
    #[serde(default = "default_n_per_class")]
    pub n_per_class: usize,
    #[serde(default = "default_steps")]
    pub steps: usize,
    /// Overrides the construction defaults of the sine kinds.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sine: Option<SineParams>,
    /// Data file of the `csv` kind; its metadata sidecar must sit next to it.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub path: Option<PathBuf>,
    /// Attribute indices held by each party; one attribute per party when
    /// absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub assignment: Option<Assignment>,
}

fn default_n_per_class() -> usize {
    1024
}

fn default_steps() -> usize {
    800
}

/// Either an explicit noise multiplier or a budget to calibrate it from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DpSection {
    #[serde(default = "default_clip")]
    pub clip: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sigma: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub epsilon: Option<f64>,
    /// Target δ of the budget, or the δ at which an explicit σ is reported.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub delta: Option<f64>,
    #[serde(default = "default_sigma_range")]
    pub sigma_range: (f64, f64),
    #[serde(default)]
    pub curve: CurveKind,
}

fn default_clip() -> f64 {
    1.0
}

fn default_sigma_range() -> (f64, f64) {
    (0.01, 1000.0)
}

/// Resolved form of a [`DpSection`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum NoisePlan {
    Fixed { clip: f64, sigma: f64, delta: Option<f64> },
    Budget { clip: f64, budget: PrivacyBudget, sigma_range: (f64, f64), curve: CurveKind },
}

impl DpSection {
    pub fn plan(&self) -> Result<NoisePlan, CliError> {
        match (self.sigma, self.epsilon) {
            (Some(sigma), None) => Ok(NoisePlan::Fixed { clip: self.clip, sigma, delta: self.delta }),
            (None, Some(epsilon)) => {
                let delta = self.delta.ok_or_else(|| CliError::Config("dp.epsilon needs dp.delta".into()))?;
                let budget = PrivacyBudget::new(epsilon, delta).map_err(|e| CliError::Config(e.to_string()))?;
                Ok(NoisePlan::Budget { clip: self.clip, budget, sigma_range: self.sigma_range, curve: self.curve })
            }
            _ => Err(CliError::Config("dp needs exactly one of sigma and epsilon".into())),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MetricKind {
    Awd,
    AmplitudeAwd,
    SineMae,
    AmplitudeRatio,
    Tpd,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EvalSection {
    pub metrics: Vec<MetricKind>,
    /// Downstream task of the `tpd` metric.
    pub task: TpdTask,
    pub tpd: TpdConfig,
    /// Synthetic samples drawn from the checkpoint; 0 means the real count.
    pub samples: usize,
    /// Share of samples held out as the downstream test split.
    pub test_fraction: f64,
    pub seed: u64,
}

impl Default for EvalSection {
    fn default() -> Self {
        Self {
            metrics: vec![MetricKind::Awd, MetricKind::AmplitudeAwd, MetricKind::SineMae, MetricKind::AmplitudeRatio],
            task: TpdTask::Forecast,
            tpd: TpdConfig::default(),
            samples: 0,
            test_fraction: 0.2,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Selector {
    Outlier,
    Influential,
    Index(usize),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TrainerKind {
    /// The federated pipeline configured by the `train` section.
    Gan,
    /// Releases its training set unchanged (a rigged worst case).
    Copy,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct AuditSection {
    pub selector: Selector,
    pub trainer: TrainerKind,
    pub release: Release,
    /// Released samples per shadow run; 0 means the training-set size.
    pub samples: usize,
    pub params: AuditConfig,
}

impl Default for AuditSection {
    fn default() -> Self {
        Self {
            selector: Selector::Outlier,
            trainer: TrainerKind::Gan,
            release: Release::Best,
            samples: 0,
            params: AuditConfig::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OutputSection {
    pub dir: PathBuf,
}

impl Default for OutputSection {
    fn default() -> Self {
        Self { dir: PathBuf::from("runs/default") }
    }
}

/// A parsed configuration together with its source text (copied verbatim
/// into every run directory and hashed into the manifest) and the directory
/// relative data paths are resolved against.
#[derive(Debug, Clone)]
pub struct Experiment {
    pub config: ExperimentConfig,
    pub source: String,
    pub base: PathBuf,
}

impl Experiment {
    pub fn from_toml(source: &str, base: impl Into<PathBuf>) -> Result<Self, CliError> {
        let config: ExperimentConfig = toml::from_str(source).map_err(|e| CliError::Config(e.to_string()))?;
        let exp = Self { config, source: source.to_string(), base: base.into() };
        exp.validate()?;
        Ok(exp)
    }

    pub fn load(path: &Path) -> Result<Self, CliError> {
        let source = std::fs::read_to_string(path)
            .map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
        let base = path.parent().map(Path::to_path_buf).unwrap_or_default();
        Self::from_toml(&source, base)
    }

    fn validate(&self) -> Result<(), CliError> {
        let c = &self.config;
        let cfg = |m: String| Err(CliError::Config(m));
        match c.dataset.kind {
            DatasetKind::Csv if c.dataset.path.is_none() => return cfg("dataset.kind = \"csv\" needs dataset.path".into()),
            DatasetKind::Csv => {}
            _ if c.dataset.path.is_some() => return cfg("dataset.path only applies to the csv kind".into()),
            _ => {}
        }
        c.train.validate().map_err(|e| CliError::Config(e.to_string()))?;
        if let Some(dp) = &c.dp {
            if c.train.dp.is_some() {
                return cfg("set noise in the dp section or in train.dp, not both".into());
            }
            match dp.plan()? {
                NoisePlan::Fixed { clip, sigma, .. } => tsfed_core::dp::DpParams { clip, sigma }
                    .validate()
                    .map_err(|e| CliError::Config(e.to_string()))?,
                NoisePlan::Budget { clip, .. } if !(clip.is_finite() && clip > 0.0) => {
                    return cfg(format!("a budget needs a finite clipping bound, got {clip}"))
                }
                NoisePlan::Budget { .. } => {}
            }
        }
        if !(c.eval.test_fraction > 0.0 && c.eval.test_fraction < 1.0) {
            return cfg(format!("eval.test_fraction must lie in (0, 1), got {}", c.eval.test_fraction));
        }
        Ok(())
    }

    /// `output.dir`, placed under the override root when it is relative and
    /// the environment variable is set.
    pub fn output_dir(&self) -> PathBuf {
        let dir = &self.config.output.dir;
        match std::env::var_os(OUTPUT_ROOT_VAR) {
            Some(root) if dir.is_relative() => PathBuf::from(root).join(dir),
            _ => dir.clone(),
        }
    }

    pub fn resolve(&self, path: &Path) -> PathBuf {
        if path.is_relative() {
            self.base.join(path)
        } else {
            path.to_path_buf()
        }
    }
}
