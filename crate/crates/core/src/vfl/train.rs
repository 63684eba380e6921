use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use super::bank::GeneratorBank;
use super::config::TrainConfig;
use super::protocol::{DiscriminatorLosses, GeneratorLosses};
use super::state::FederationState;
use super::{Result, VflError};
use crate::data::{merge_views, PartyView, TimeSeriesDataset};
use crate::eval::{amplitude_awd, awd};
use crate::seed::derive_seed;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IterationRecord {
    /// 1-based; the row for iteration 0 carries only the initial score.
    pub iteration: usize,
    pub discriminator: Vec<f64>,
    pub server: Option<f64>,
    pub extractor: Vec<f64>,
    pub generator: Vec<f64>,
    pub score: Option<f64>,
}

/// Per-iteration losses in global attribute order, plus checkpoint scores.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct History {
    pub n_attributes: usize,
    pub has_server: bool,
    pub n_extractors: usize,
    /// Name of the checkpoint score (`amplitude_awd` or `awd`).
    pub score_metric: String,
    pub records: Vec<IterationRecord>,
}

fn global_order(per_party: &[Vec<f64>], state: &FederationState) -> Vec<f64> {
    let mut out = vec![0.0; state.n_attributes];
    for (party, values) in state.parties.iter().zip(per_party) {
        for (&a, &v) in party.attributes.iter().zip(values) {
            out[a] = v;
        }
    }
    out
}

impl History {
    pub fn header(&self) -> Vec<String> {
        let mut h = vec!["iteration".to_string()];
        h.extend((0..self.n_attributes).map(|a| format!("loss_d{a}")));
        if self.has_server {
            h.push("loss_server".into());
        }
        h.extend((0..self.n_extractors).map(|p| format!("loss_fe{p}")));
        h.extend((0..self.n_attributes).map(|a| format!("loss_g{a}")));
        h.push(self.score_metric.clone());
        h
    }

    /// CSV with one row per iteration; empty cells where a value was not
    /// produced. Floats use shortest round-trip formatting.
    pub fn to_csv(&self) -> String {
        let mut out = self.header().join(",");
        out.push('\n');
        let cell = |v: Option<f64>| v.map(|x| format!("{x:?}")).unwrap_or_default();
        for r in &self.records {
            let mut row = vec![r.iteration.to_string()];
            let pad = |vals: &[f64], n: usize| -> Vec<String> {
                if vals.is_empty() {
                    vec![String::new(); n]
                } else {
                    vals.iter().map(|v| cell(Some(*v))).collect()
                }
            };
            row.extend(pad(&r.discriminator, self.n_attributes));
            if self.has_server {
                row.push(cell(r.server));
            }
            row.extend(pad(&r.extractor, self.n_extractors));
            row.extend(pad(&r.generator, self.n_attributes));
            row.push(cell(r.score));
            let _ = writeln!(out, "{}", row.join(","));
        }
        out
    }

    pub fn scores(&self) -> Vec<(usize, f64)> {
        self.records.iter().filter_map(|r| r.score.map(|s| (r.iteration, s))).collect()
    }
}

#[derive(Debug, Clone)]
pub struct TrainOutcome {
    /// Generators at the lowest-scoring checkpoint.
    pub best: GeneratorBank,
    pub best_iteration: usize,
    pub best_score: f64,
    pub initial_score: f64,
    pub history: History,
    /// State after the last completed iteration.
    pub state: FederationState,
    /// Set when training stopped on a non-finite loss.
    pub diverged: Option<String>,
    /// `B / N`, as fed to the accountant.
    pub sampling_rate: f64,
}

/// Scores synthetic data against a fixed reference: amplitude-AWD when the
/// sine frequencies are known, per-cell AWD otherwise.
pub struct CheckpointScorer {
    reference: TimeSeriesDataset,
    frequencies: Option<Vec<f64>>,
    samples: usize,
    seed: u64,
}

impl CheckpointScorer {
    pub fn new(reference: TimeSeriesDataset, frequencies: Option<Vec<f64>>, samples: usize, seed: u64) -> Self {
        let samples = if samples == 0 { reference.n_samples() } else { samples };
        Self { reference, frequencies, samples, seed }
    }

    pub fn metric_name(&self) -> &'static str {
        if self.frequencies.is_some() {
            "amplitude_awd"
        } else {
            "awd"
        }
    }

    pub fn score(&self, bank: &GeneratorBank) -> Result<f64> {
        let synth = bank.synthesize(self.samples, self.seed)?;
        Ok(match &self.frequencies {
            Some(f) => amplitude_awd(&self.reference, &synth, f)?,
            None => awd(&self.reference, &synth)?.value,
        })
    }
}

/// Runs `config.iterations` iterations, scoring the generators at iteration 0,
/// every `checkpoint_every` iterations and at the end, and keeps the
/// lowest-scoring snapshot.
pub fn train(config: &TrainConfig, views: &[PartyView], frequencies: Option<&[f64]>) -> Result<TrainOutcome> {
    let reference = TimeSeriesDataset::new(merge_views(views)?, None)?;
    let scorer = CheckpointScorer::new(reference, frequencies.map(<[f64]>::to_vec), config.eval_samples, derive_seed(config.seed, "eval"));
    train_with(config, views, &scorer)
}

pub fn train_with(config: &TrainConfig, views: &[PartyView], scorer: &CheckpointScorer) -> Result<TrainOutcome> {
    let mut state = FederationState::new(config, views)?;
    let mut history = History {
        n_attributes: state.n_attributes,
        has_server: state.server.is_some(),
        n_extractors: state.parties.iter().filter(|p| p.extractor.is_some()).count(),
        score_metric: scorer.metric_name().into(),
        records: Vec::with_capacity(config.iterations + 1),
    };
    let initial_bank = state.generator_bank();
    let initial_score = scorer.score(&initial_bank)?;
    history.records.push(IterationRecord {
        iteration: 0,
        discriminator: Vec::new(),
        server: None,
        extractor: Vec::new(),
        generator: Vec::new(),
        score: Some(initial_score),
    });
    let (mut best, mut best_iteration, mut best_score) = (initial_bank, 0, initial_score);
    let mut diverged = None;

    for it in 1..=config.iterations {
        let (d, g): (DiscriminatorLosses, GeneratorLosses) = match state.step(views) {
            Ok(losses) => losses,
            Err(VflError::Divergence { iteration, detail }) => {
                diverged = Some(format!("iteration {}: {detail}", iteration + 1));
                break;
            }
            Err(e) => return Err(e),
        };
        let score = if it % config.checkpoint_every == 0 || it == config.iterations {
            let bank = state.generator_bank();
            let s = scorer.score(&bank)?;
            if s < best_score {
                (best, best_iteration, best_score) = (bank, it, s);
            }
            Some(s)
        } else {
            None
        };
        history.records.push(IterationRecord {
            iteration: it,
            discriminator: global_order(&d.local, &state),
            server: d.server,
            extractor: d.extractor,
            generator: global_order(&g.local, &state),
            score,
        });
    }
    let sampling_rate = config.batch_size as f64 / state.n_samples as f64;
    Ok(TrainOutcome { best, best_iteration, best_score, initial_score, history, state, diverged, sampling_rate })
}
