use super::{AuditError, Result};
use crate::data::{partition, Assignment, TimeSeriesDataset};
use crate::seed::derive_seed;
use crate::vfl::{train, TrainConfig};

/// Anything that turns a training set into a released synthetic dataset.
/// Implementations must be deterministic in `seed`.
pub trait ShadowTrainer: Sync {
    fn synthesize(&self, training: &TimeSeriesDataset, seed: u64) -> Result<TimeSeriesDataset>;
}

/// The full federated pipeline: partition, train with checkpoint selection,
/// release samples from the selected generators.
#[derive(Debug, Clone)]
pub struct GanTrainer {
    pub config: TrainConfig,
    pub assignment: Assignment,
    /// Released sample count; `0` means the training-set size.
    pub samples: usize,
    pub release: Release,
}

/// Which generators a shadow run releases.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Release {
    /// The lowest-scoring checkpoint, as the training pipeline does.
    #[default]
    Best,
    /// The last iterate.
    Final,
}

impl ShadowTrainer for GanTrainer {
    fn synthesize(&self, training: &TimeSeriesDataset, seed: u64) -> Result<TimeSeriesDataset> {
        let views = partition(training, &self.assignment).map_err(|e| AuditError::Argument(e.to_string()))?;
        let config = TrainConfig { seed, ..self.config.clone() };
        let outcome = train(&config, &views, training.frequencies())?;
        if let Some(detail) = outcome.diverged {
            return Err(AuditError::Diverged(detail));
        }
        let n = if self.samples == 0 { training.n_samples() } else { self.samples };
        let bank = match self.release {
            Release::Best => outcome.best,
            Release::Final => outcome.state.generator_bank(),
        };
        Ok(bank.synthesize(n, derive_seed(seed, "release"))?)
    }
}

/// Releases the training set verbatim: the worst case for privacy.
#[derive(Debug, Clone, Copy, Default)]
pub struct CopyTrainer;

impl ShadowTrainer for CopyTrainer {
    fn synthesize(&self, training: &TimeSeriesDataset, _seed: u64) -> Result<TimeSeriesDataset> {
        Ok(training.clone())
    }
}
