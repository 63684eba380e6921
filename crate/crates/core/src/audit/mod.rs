//! Shadow-model membership-inference audit under the leave-one-out
//! assumption.
//!
//! The adversary knows the whole training set except whether one target
//! sample is in it. Two worlds are simulated: world 0 trains without the
//! target, world 1 with it. Each world is trained `M` times with independent
//! seeds, every release is scored by the KNN feature of the target, and the
//! separability of the two score samples is summarized by the AUC-ROC.

mod auc;
mod distance;
mod trainer;

pub use auc::{auc_roc, Orientation};
pub use distance::{
    distance, isolation, isolation_ranking, knn_feature, min_nn_distance, select_influential_from, select_target_outlier,
    Normalizer,
};
pub use trainer::{CopyTrainer, GanTrainer, Release, ShadowTrainer};

use std::fmt::Write as _;

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::data::TimeSeriesDataset;
use crate::seed::{derive_seed, stream};

#[derive(Debug, Error)]
pub enum AuditError {
    #[error("invalid argument: {0}")]
    Argument(String),
    #[error("shadow training diverged: {0}")]
    Diverged(String),
    #[error("world {world} has only {valid} valid shadow runs (need at least 2)")]
    Insufficient { world: usize, valid: usize },
    #[error(transparent)]
    Vfl(#[from] crate::vfl::VflError),
}

pub type Result<T> = std::result::Result<T, AuditError>;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct AuditConfig {
    /// Shadow trainings per world (`M`).
    pub shadow_pairs: usize,
    /// Neighbours summed by the KNN feature.
    pub k: usize,
    /// Candidate-set size of the influential-target selector.
    pub m: usize,
    /// Distance norm order, 1 or 2.
    pub norm: u8,
    /// Leave-one-out game rounds after the shadow stage; 0 skips the game.
    pub rounds: usize,
    pub seed: u64,
    /// Worker threads for shadow jobs; 0 uses the global pool.
    pub workers: usize,
}

impl Default for AuditConfig {
    fn default() -> Self {
        Self { shadow_pairs: 10, k: 5, m: 10, norm: 2, rounds: 100, seed: 0, workers: 0 }
    }
}

impl AuditConfig {
    pub fn validate(&self, n_samples: usize) -> Result<()> {
        let bad = |msg: String| Err(AuditError::Argument(msg));
        if self.shadow_pairs < 2 {
            return bad(format!("need at least 2 shadow pairs, got {}", self.shadow_pairs));
        }
        if self.k == 0 {
            return bad("k must be >= 1".into());
        }
        if self.m == 0 || self.m > n_samples {
            return bad(format!("m = {} outside 1..={n_samples}", self.m));
        }
        if self.norm != 1 && self.norm != 2 {
            return bad(format!("norm order must be 1 or 2, got {}", self.norm));
        }
        Ok(())
    }

    fn run<T: Send>(&self, job: impl FnOnce() -> T + Send) -> Result<T> {
        if self.workers == 0 {
            return Ok(job());
        }
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(self.workers)
            .build()
            .map_err(|e| AuditError::Argument(format!("worker pool: {e}")))?;
        Ok(pool.install(job))
    }
}

/// How the target was chosen.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "selector")]
pub enum Provenance {
    Outlier,
    Influential { candidates: Vec<(usize, f64)> },
    Explicit,
}

/// Guessing rule of the leave-one-out game.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Adversary {
    /// Guess "present" when the feature lies on the present side of
    /// `threshold`.
    Threshold { threshold: f64, orientation: Orientation },
    /// Ignores the release and flips a fair coin.
    Coin,
    /// Is told the answer.
    Oracle,
}

impl Adversary {
    fn guess(&self, feature: f64, truth: bool, coin: bool) -> bool {
        match *self {
            Adversary::Threshold { threshold, orientation: Orientation::SmallerMeansPresent } => feature < threshold,
            Adversary::Threshold { threshold, orientation: Orientation::LargerMeansPresent } => feature > threshold,
            Adversary::Coin => coin,
            Adversary::Oracle => truth,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LooOutcome {
    pub adversary: Adversary,
    pub rounds: usize,
    pub wins: usize,
    pub win_rate: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AuditReport {
    pub target_index: usize,
    pub provenance: Provenance,
    pub orientation: Orientation,
    /// KNN feature of each world-0 (target absent) shadow release; `None`
    /// marks a diverged run.
    pub absent: Vec<Option<f64>>,
    /// Same for world 1 (target present).
    pub present: Vec<Option<f64>>,
    pub auc: f64,
    pub loo: Option<LooOutcome>,
    pub config: AuditConfig,
}

impl AuditReport {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }

    /// `world,run,feature` rows, empty feature for invalid runs.
    pub fn features_csv(&self) -> String {
        let mut out = String::from("world,run,feature\n");
        for (world, values) in [&self.absent, &self.present].into_iter().enumerate() {
            for (run, v) in values.iter().enumerate() {
                let cell = v.map(|x| format!("{x:?}")).unwrap_or_default();
                let _ = writeln!(out, "{world},{run},{cell}");
            }
        }
        out
    }

    fn valid(values: &[Option<f64>]) -> Vec<f64> {
        values.iter().flatten().copied().collect()
    }

    /// Midpoint of the two worlds' mean features.
    pub fn midpoint(&self) -> f64 {
        let mean = |v: &[f64]| v.iter().sum::<f64>() / v.len() as f64;
        0.5 * (mean(&Self::valid(&self.absent)) + mean(&Self::valid(&self.present)))
    }
}

fn check_target(dataset: &TimeSeriesDataset, target: usize) -> Result<()> {
    if target >= dataset.n_samples() {
        return Err(AuditError::Argument(format!("target {target} outside 0..{}", dataset.n_samples())));
    }
    if dataset.n_samples() < 2 {
        return Err(AuditError::Argument("need at least two samples".into()));
    }
    Ok(())
}

/// Trains once on all data and picks, among the `m` most isolated samples,
/// the one the release reproduces most closely.
pub fn select_target_influential(
    dataset: &TimeSeriesDataset,
    trainer: &dyn ShadowTrainer,
    config: &AuditConfig,
) -> Result<(usize, Provenance)> {
    config.validate(dataset.n_samples())?;
    let norm = Normalizer::fit(dataset);
    let synth = trainer.synthesize(dataset, derive_seed(config.seed, "audit/influential"))?;
    let (index, candidates) = select_influential_from(&norm.apply(dataset)?, &norm.apply(&synth)?, config.m, config.k, config.norm)?;
    Ok((index, Provenance::Influential { candidates }))
}

/// KNN feature of `target` against releases trained on `training` with each
/// of `seeds`, in seed order. Diverged runs yield `None`.
fn shadow_features(
    training: &TimeSeriesDataset,
    target: &ndarray::Array1<f64>,
    norm: &Normalizer,
    trainer: &dyn ShadowTrainer,
    seeds: &[u64],
    config: &AuditConfig,
) -> Result<Vec<Option<f64>>> {
    let jobs: Vec<Result<Option<f64>>> = config.run(|| {
        seeds
            .par_iter()
            .map(|&seed| match trainer.synthesize(training, seed) {
                Ok(synth) => Ok(Some(knn_feature(target.view(), &norm.apply(&synth)?, config.k, config.norm)?)),
                Err(AuditError::Diverged(_)) => Ok(None),
                Err(e) => Err(e),
            })
            .collect()
    })?;
    jobs.into_iter().collect()
}

/// Runs the shadow stage on explicit worlds. `absent_world` and
/// `present_world` are the two candidate training sets, and `target` the
/// sample whose membership is in question (as a sample of `reference`, which
/// also fixes the normalization).
pub fn run_assd_worlds(
    reference: &TimeSeriesDataset,
    target: usize,
    provenance: Provenance,
    absent_world: &TimeSeriesDataset,
    present_world: &TimeSeriesDataset,
    trainer: &dyn ShadowTrainer,
    config: &AuditConfig,
) -> Result<AuditReport> {
    check_target(reference, target)?;
    config.validate(reference.n_samples())?;
    let norm = Normalizer::fit(reference);
    let x = norm.apply_sample(reference, target)?;
    let seeds = |world: usize| -> Vec<u64> {
        (0..config.shadow_pairs).map(|r| derive_seed(config.seed, &format!("audit/shadow/{world}/{r}"))).collect()
    };
    let absent = shadow_features(absent_world, &x, &norm, trainer, &seeds(0), config)?;
    let present = shadow_features(present_world, &x, &norm, trainer, &seeds(1), config)?;
    for (world, v) in [&absent, &present].into_iter().enumerate() {
        let valid = v.iter().flatten().count();
        if valid < 2 {
            return Err(AuditError::Insufficient { world, valid });
        }
    }
    let orientation = Orientation::SmallerMeansPresent;
    let auc = auc_roc(&AuditReport::valid(&absent), &AuditReport::valid(&present), orientation);
    let mut report = AuditReport { target_index: target, provenance, orientation, absent, present, auc, loo: None, config: config.clone() };
    if config.rounds > 0 {
        let adversary = Adversary::Threshold { threshold: report.midpoint(), orientation };
        report.loo = Some(loo_game_worlds(reference, target, absent_world, present_world, trainer, adversary, config.rounds, config)?);
    }
    Ok(report)
}

/// Shadow stage on `dataset` without and with sample `target`, followed by
/// the leave-one-out game when `config.rounds > 0`.
pub fn run_assd(
    dataset: &TimeSeriesDataset,
    target: usize,
    provenance: Provenance,
    trainer: &dyn ShadowTrainer,
    config: &AuditConfig,
) -> Result<AuditReport> {
    check_target(dataset, target)?;
    let absent = dataset.without(target).map_err(|e| AuditError::Argument(e.to_string()))?;
    run_assd_worlds(dataset, target, provenance, &absent, dataset, trainer, config)
}

/// The challenger flips a fair coin `b` each round, trains on world `b` with
/// a fresh seed and hands the release to the adversary, who wins by guessing
/// `b`. Rounds whose training diverges count as losses.
pub fn loo_game(
    dataset: &TimeSeriesDataset,
    target: usize,
    trainer: &dyn ShadowTrainer,
    adversary: Adversary,
    rounds: usize,
    config: &AuditConfig,
) -> Result<LooOutcome> {
    check_target(dataset, target)?;
    let absent = dataset.without(target).map_err(|e| AuditError::Argument(e.to_string()))?;
    loo_game_worlds(dataset, target, &absent, dataset, trainer, adversary, rounds, config)
}

#[allow(clippy::too_many_arguments)]
fn loo_game_worlds(
    reference: &TimeSeriesDataset,
    target: usize,
    absent_world: &TimeSeriesDataset,
    present_world: &TimeSeriesDataset,
    trainer: &dyn ShadowTrainer,
    adversary: Adversary,
    rounds: usize,
    config: &AuditConfig,
) -> Result<LooOutcome> {
    if rounds == 0 {
        return Err(AuditError::Argument("the game needs at least one round".into()));
    }
    let norm = Normalizer::fit(reference);
    let x = norm.apply_sample(reference, target)?;
    let mut coins = stream(config.seed, "audit/loo/challenger");
    let mut flips = stream(config.seed, "audit/loo/adversary");
    let draws: Vec<(bool, bool, u64)> = (0..rounds)
        .map(|r| (coins.random::<bool>(), flips.random::<bool>(), derive_seed(config.seed, &format!("audit/loo/{r}"))))
        .collect();
    let outcomes: Vec<Result<bool>> = config.run(|| {
        draws
            .par_iter()
            .map(|&(b, coin, seed)| {
                let world = if b { present_world } else { absent_world };
                let feature = match trainer.synthesize(world, seed) {
                    Ok(synth) => knn_feature(x.view(), &norm.apply(&synth)?, config.k, config.norm)?,
                    Err(AuditError::Diverged(_)) => return Ok(false),
                    Err(e) => return Err(e),
                };
                Ok(adversary.guess(feature, b, coin) == b)
            })
            .collect()
    })?;
    let wins = outcomes.into_iter().collect::<Result<Vec<bool>>>()?.into_iter().filter(|&w| w).count();
    Ok(LooOutcome { adversary, rounds, wins, win_rate: wins as f64 / rounds as f64 })
}
