//! Downstream-task utility: train small networks on real or synthetic data
//! and compare their scores across the four train/test combinations.

use ndarray::{s, Array2, Axis};
use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use super::{EvalError, Result};
use crate::data::TimeSeriesDataset;
use crate::nn::{Activation, AdamConfig, AdamState, MlpModel};
use crate::seed::stream;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TpdTask {
    /// Class label from the flattened series; scored by accuracy.
    Classify,
    /// Last step of each attribute from the preceding `T − 1`; scored by
    /// mean absolute error.
    Forecast,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TpdConfig {
    pub classifier_hidden: usize,
    pub forecaster_hidden: usize,
    pub epochs: usize,
    pub batch_size: usize,
    pub lr: f64,
    pub seed: u64,
}

impl Default for TpdConfig {
    fn default() -> Self {
        Self { classifier_hidden: 64, forecaster_hidden: 32, epochs: 30, batch_size: 64, lr: 1e-3, seed: 0 }
    }
}

/// Scores of the four scenarios and their total absolute gap to TRTR.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TpdReport {
    pub task: TpdTask,
    pub trtr: f64,
    pub tsts: f64,
    pub trts: f64,
    pub tstr: f64,
    pub tpd: f64,
}

/// `|P_TSTS − P_TRTR| + |P_TRTS − P_TRTR| + |P_TSTR − P_TRTR|`.
pub fn tpd_from_scores(trtr: f64, tsts: f64, trts: f64, tstr: f64) -> f64 {
    (tsts - trtr).abs() + (trts - trtr).abs() + (tstr - trtr).abs()
}

trait Scorer {
    fn score(&self, data: &TimeSeriesDataset) -> Result<f64>;
}

struct Classifier {
    model: MlpModel<f64>,
}

struct Forecaster {
    models: Vec<MlpModel<f64>>,
}

fn leaky() -> Activation {
    Activation::leaky(0.2)
}

/// Minibatch Adam over `(inputs, targets)` with a caller-supplied loss
/// gradient `dL/dout` (already divided by the batch size).
fn fit(
    model: &mut MlpModel<f64>,
    inputs: &Array2<f64>,
    targets: &Array2<f64>,
    cfg: &TpdConfig,
    tag: &str,
    loss_grad: impl Fn(&Array2<f64>, &Array2<f64>) -> Array2<f64>,
) -> Result<()> {
    let mut adam = AdamState::new(model, AdamConfig::default().with_lr(cfg.lr));
    let mut rng = stream(cfg.seed, tag);
    let mut order: Vec<usize> = (0..inputs.nrows()).collect();
    for _ in 0..cfg.epochs {
        order.shuffle(&mut rng);
        for chunk in order.chunks(cfg.batch_size.max(1)) {
            let x = inputs.select(Axis(0), chunk);
            let y = targets.select(Axis(0), chunk);
            let trace = model.forward(&x)?;
            let g = loss_grad(trace.output(), &y);
            let (grads, _) = model.backward(&trace, &g)?;
            adam.step(model, &grads)?;
        }
    }
    Ok(())
}

fn softmax_rows(logits: &Array2<f64>) -> Array2<f64> {
    let mut p = logits.clone();
    for mut row in p.rows_mut() {
        let m = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        row.mapv_inplace(|v| (v - m).exp());
        let z = row.sum();
        row.mapv_inplace(|v| v / z);
    }
    p
}

fn labels_of(data: &TimeSeriesDataset) -> Result<&[usize]> {
    data.labels().ok_or_else(|| EvalError::Argument("classification needs labelled datasets".into()))
}

impl Classifier {
    fn train(data: &TimeSeriesDataset, classes: usize, cfg: &TpdConfig) -> Result<Self> {
        let labels = labels_of(data)?;
        let x = data.flattened();
        let mut y = Array2::zeros((data.n_samples(), classes));
        for (i, &l) in labels.iter().enumerate() {
            y[[i, l]] = 1.0;
        }
        let mut rng = stream(cfg.seed, "tpd/classify/init");
        let mut model = MlpModel::xavier(&[x.ncols(), cfg.classifier_hidden, classes], leaky(), Activation::Identity, &mut rng)?;
        fit(&mut model, &x, &y, cfg, "tpd/classify/batch", |logits, onehot| {
            (softmax_rows(logits) - onehot) / logits.nrows() as f64
        })?;
        Ok(Self { model })
    }
}

impl Scorer for Classifier {
    fn score(&self, data: &TimeSeriesDataset) -> Result<f64> {
        let labels = labels_of(data)?;
        let logits = self.model.predict(&data.flattened())?;
        let hits = logits
            .rows()
            .into_iter()
            .zip(labels)
            .filter(|(row, &l)| {
                let arg = row.iter().enumerate().fold(0, |best, (i, &v)| if v > row[best] { i } else { best });
                arg == l
            })
            .count();
        Ok(hits as f64 / labels.len() as f64)
    }
}

fn forecast_split(data: &TimeSeriesDataset, attr: usize) -> (Array2<f64>, Array2<f64>) {
    let a = data.attribute(attr);
    let t = data.steps();
    (a.slice(s![.., ..t - 1]).to_owned(), a.slice(s![.., t - 1..]).to_owned())
}

impl Forecaster {
    fn train(data: &TimeSeriesDataset, cfg: &TpdConfig) -> Result<Self> {
        if data.steps() < 2 {
            return Err(EvalError::Argument("forecasting needs T ≥ 2".into()));
        }
        let models = (0..data.n_attributes())
            .map(|attr| {
                let (x, y) = forecast_split(data, attr);
                let mut rng = stream(cfg.seed, &format!("tpd/forecast/init/{attr}"));
                let mut model = MlpModel::xavier(&[x.ncols(), cfg.forecaster_hidden, 1], leaky(), Activation::Identity, &mut rng)?;
                fit(&mut model, &x, &y, cfg, &format!("tpd/forecast/batch/{attr}"), |pred, target| {
                    (pred - target) * (2.0 / pred.nrows() as f64)
                })?;
                Ok(model)
            })
            .collect::<Result<_>>()?;
        Ok(Self { models })
    }
}

impl Scorer for Forecaster {
    fn score(&self, data: &TimeSeriesDataset) -> Result<f64> {
        let mut total = 0.0;
        for (attr, model) in self.models.iter().enumerate() {
            let (x, y) = forecast_split(data, attr);
            let pred = model.predict(&x)?;
            total += (&pred - &y).mapv(f64::abs).sum();
        }
        Ok(total / (data.n_samples() * self.models.len()) as f64)
    }
}

fn trained(task: TpdTask, data: &TimeSeriesDataset, classes: usize, cfg: &TpdConfig) -> Result<Box<dyn Scorer>> {
    Ok(match task {
        TpdTask::Classify => Box::new(Classifier::train(data, classes, cfg)?),
        TpdTask::Forecast => Box::new(Forecaster::train(data, cfg)?),
    })
}

/// Trains one model on real and one on synthetic training data (same seed
/// and schedule) and scores each on both test sets.
pub fn tpd(
    real_train: &TimeSeriesDataset,
    real_test: &TimeSeriesDataset,
    synth_train: &TimeSeriesDataset,
    synth_test: &TimeSeriesDataset,
    task: TpdTask,
    cfg: &TpdConfig,
) -> Result<TpdReport> {
    let all = [real_train, real_test, synth_train, synth_test];
    if all.iter().any(|d| d.n_attributes() != real_train.n_attributes() || d.steps() != real_train.steps()) {
        return Err(EvalError::Shape("downstream datasets differ in attributes or length".into()));
    }
    let classes = match task {
        TpdTask::Classify => {
            let mut max = 0;
            for d in all {
                max = max.max(labels_of(d)?.iter().copied().max().unwrap_or(0));
            }
            max + 1
        }
        TpdTask::Forecast => 0,
    };
    let on_real = trained(task, real_train, classes, cfg)?;
    let on_synth = trained(task, synth_train, classes, cfg)?;
    let trtr = on_real.score(real_test)?;
    let trts = on_real.score(synth_test)?;
    let tsts = on_synth.score(synth_test)?;
    let tstr = on_synth.score(real_test)?;
    Ok(TpdReport { task, trtr, tsts, trts, tstr, tpd: tpd_from_scores(trtr, tsts, trts, tstr) })
}
