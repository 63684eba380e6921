//! Distances between flattened samples, target selection and the KNN
//! feature.

use ndarray::{Array1, Array2, ArrayView1, Axis};
use serde::{Deserialize, Serialize};

use super::{AuditError, Result};
use crate::data::TimeSeriesDataset;

/// Per-attribute z-scoring fitted on the real data, applied to flattened
/// `|A|·T` sample vectors so no attribute dominates the distance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Normalizer {
    pub mean: Vec<f64>,
    pub std: Vec<f64>,
    steps: usize,
}

impl Normalizer {
    /// Statistics over every sample and time step of each attribute. A
    /// constant attribute gets unit scale.
    pub fn fit(real: &TimeSeriesDataset) -> Self {
        let (mut mean, mut std) = (Vec::new(), Vec::new());
        for a in 0..real.n_attributes() {
            let col = real.attribute(a);
            let m = col.mean().unwrap_or(0.0);
            let s = col.std(0.0);
            mean.push(m);
            std.push(if s > 0.0 && s.is_finite() { s } else { 1.0 });
        }
        Self { mean, std, steps: real.steps() }
    }

    /// Identity normalization for `n_attributes × steps` samples.
    pub fn identity(n_attributes: usize, steps: usize) -> Self {
        Self { mean: vec![0.0; n_attributes], std: vec![1.0; n_attributes], steps }
    }

    /// `N × |A|·T` matrix of normalized samples.
    pub fn apply(&self, ds: &TimeSeriesDataset) -> Result<Array2<f64>> {
        if ds.n_attributes() != self.mean.len() || ds.steps() != self.steps {
            return Err(AuditError::Argument(format!(
                "dataset is {}×{}, normalizer expects {}×{}",
                ds.n_attributes(),
                ds.steps(),
                self.mean.len(),
                self.steps
            )));
        }
        let mut flat = ds.flattened();
        for (i, mut v) in flat.axis_iter_mut(Axis(1)).enumerate() {
            let a = i / self.steps;
            v.mapv_inplace(|x| (x - self.mean[a]) / self.std[a]);
        }
        Ok(flat)
    }

    pub fn apply_sample(&self, ds: &TimeSeriesDataset, index: usize) -> Result<Array1<f64>> {
        Ok(self.apply(&ds.select(&[index]).map_err(|e| AuditError::Argument(e.to_string()))?)?.row(0).to_owned())
    }
}

/// Minkowski distance of order `norm` (1 or 2).
pub fn distance(x: ArrayView1<f64>, y: ArrayView1<f64>, norm: u8) -> f64 {
    let pairs = x.iter().zip(y.iter());
    match norm {
        1 => pairs.map(|(a, b)| (a - b).abs()).sum(),
        _ => pairs.map(|(a, b)| (a - b) * (a - b)).sum::<f64>().sqrt(),
    }
}

fn check_norm(norm: u8) -> Result<()> {
    if norm == 1 || norm == 2 {
        Ok(())
    } else {
        Err(AuditError::Argument(format!("norm order must be 1 or 2, got {norm}")))
    }
}

/// Smallest distance from `x` to any row of `pool`.
pub fn min_nn_distance(x: ArrayView1<f64>, pool: &Array2<f64>, norm: u8) -> Result<f64> {
    check_norm(norm)?;
    if pool.nrows() == 0 {
        return Err(AuditError::Argument("empty pool".into()));
    }
    Ok(pool.rows().into_iter().map(|r| distance(x, r, norm)).fold(f64::INFINITY, f64::min))
}

/// Distance of every row to its nearest other row.
pub fn isolation(samples: &Array2<f64>, norm: u8) -> Result<Vec<f64>> {
    check_norm(norm)?;
    if samples.nrows() < 2 {
        return Err(AuditError::Argument("need at least two samples".into()));
    }
    Ok((0..samples.nrows())
        .map(|i| {
            samples
                .rows()
                .into_iter()
                .enumerate()
                .filter(|&(j, _)| j != i)
                .map(|(_, r)| distance(samples.row(i), r, norm))
                .fold(f64::INFINITY, f64::min)
        })
        .collect())
}

/// Indices sorted by decreasing isolation. Ties (mutual nearest neighbours
/// always tie) go to the lexicographically smaller sample, then the lower
/// index, so the selected sample does not depend on the input order.
pub fn isolation_ranking(samples: &Array2<f64>, norm: u8) -> Result<Vec<usize>> {
    let iso = isolation(samples, norm)?;
    let lex = |a: usize, b: usize| {
        samples.row(a).iter().zip(samples.row(b).iter()).map(|(x, y)| x.total_cmp(y)).find(|o| o.is_ne()).unwrap_or(std::cmp::Ordering::Equal)
    };
    let mut order: Vec<usize> = (0..iso.len()).collect();
    order.sort_by(|&a, &b| iso[b].total_cmp(&iso[a]).then(lex(a, b)).then(a.cmp(&b)));
    Ok(order)
}

/// The most isolated sample: the argmax over samples of the distance to the
/// nearest other sample.
pub fn select_target_outlier(samples: &Array2<f64>, norm: u8) -> Result<usize> {
    Ok(isolation_ranking(samples, norm)?[0])
}

/// Sum of the `k` smallest distances from `target` to rows of `synth`.
pub fn knn_feature(target: ArrayView1<f64>, synth: &Array2<f64>, k: usize, norm: u8) -> Result<f64> {
    check_norm(norm)?;
    if k == 0 || k > synth.nrows() {
        return Err(AuditError::Argument(format!("k = {k} outside 1..={}", synth.nrows())));
    }
    let mut d: Vec<f64> = synth.rows().into_iter().map(|r| distance(target, r, norm)).collect();
    d.select_nth_unstable_by(k - 1, f64::total_cmp);
    let mut nearest = d[..k].to_vec();
    nearest.sort_by(f64::total_cmp);
    Ok(nearest.iter().sum())
}

/// Among the `m` most isolated samples, the one with the smallest KNN feature
/// against `synth` (ties by isolation rank). Returns the index and the
/// candidate list with their features.
pub fn select_influential_from(
    samples: &Array2<f64>,
    synth: &Array2<f64>,
    m: usize,
    k: usize,
    norm: u8,
) -> Result<(usize, Vec<(usize, f64)>)> {
    if m == 0 || m > samples.nrows() {
        return Err(AuditError::Argument(format!("m = {m} outside 1..={}", samples.nrows())));
    }
    let candidates: Vec<(usize, f64)> = isolation_ranking(samples, norm)?
        .into_iter()
        .take(m)
        .map(|i| Ok((i, knn_feature(samples.row(i), synth, k, norm)?)))
        .collect::<Result<_>>()?;
    let best = candidates.iter().fold(candidates[0], |best, &c| if c.1 < best.1 { c } else { best });
    Ok((best.0, candidates))
}
