//! Synthetic sine datasets whose attributes share one amplitude per sample.
//!
//! `x_n[t] = A · sin(2π f_n t) + ε`, `t = 0, 1, …, T−1`, with `A` drawn once
//! per sample from the sample's class and `ε` i.i.d. per (attribute, step).

use std::f64::consts::PI;

use ndarray::Array3;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use super::dataset::{DatasetMeta, TimeSeriesDataset};
use super::error::{DataError, Result};

pub const TWO_ATTRIBUTE_FREQUENCIES: [f64; 2] = [0.01, 0.005];
pub const SIX_ATTRIBUTE_FREQUENCIES: [f64; 6] = [0.01, 0.005, 0.0075, 0.0125, 0.015, 0.0175];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SineParams {
    pub frequencies: Vec<f64>,
    /// One amplitude mean per class.
    pub class_means: Vec<f64>,
    pub amplitude_std: f64,
    pub noise_std: f64,
    /// Overrides the amplitude draw (used for noiseless checks).
    #[serde(default)]
    pub fixed_amplitude: Option<f64>,
}

impl SineParams {
    pub fn two_attribute() -> Self {
        Self::with_frequencies(TWO_ATTRIBUTE_FREQUENCIES.to_vec())
    }

    pub fn six_attribute() -> Self {
        Self::with_frequencies(SIX_ATTRIBUTE_FREQUENCIES.to_vec())
    }

    pub fn with_frequencies(frequencies: Vec<f64>) -> Self {
        Self {
            frequencies,
            class_means: vec![0.4, 0.6],
            amplitude_std: 0.05,
            noise_std: 0.05,
            fixed_amplitude: None,
        }
    }

    pub fn noiseless(mut self, amplitude: f64) -> Self {
        self.noise_std = 0.0;
        self.fixed_amplitude = Some(amplitude);
        self
    }
}

/// Builds `n_per_class · classes` samples; labels are class indices in
/// contiguous blocks.
pub fn gen_sine(n_per_class: usize, steps: usize, seed: u64, params: &SineParams) -> Result<TimeSeriesDataset> {
    if n_per_class == 0 || steps < 2 {
        return Err(DataError::Argument(format!(
            "need n_per_class ≥ 1 and T ≥ 2, got {n_per_class} and {steps}"
        )));
    }
    if params.frequencies.is_empty() || params.class_means.is_empty() {
        return Err(DataError::Argument("need at least one frequency and one class".into()));
    }
    let bad = |v: f64| !v.is_finite() || v < 0.0;
    if bad(params.amplitude_std) || bad(params.noise_std) {
        return Err(DataError::Argument("standard deviations must be finite and ≥ 0".into()));
    }

    let n_attr = params.frequencies.len();
    let classes = params.class_means.len();
    let n = n_per_class * classes;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let noise = Normal::new(0.0, params.noise_std).expect("validated std");
    let mut data = Array3::zeros((n, n_attr, steps));
    let mut labels = Vec::with_capacity(n);

    for (class, &mean) in params.class_means.iter().enumerate() {
        let amp_dist = Normal::new(mean, params.amplitude_std).expect("validated std");
        for i in 0..n_per_class {
            let sample = class * n_per_class + i;
            let amplitude = params.fixed_amplitude.unwrap_or_else(|| amp_dist.sample(&mut rng));
            for (attr, &f) in params.frequencies.iter().enumerate() {
                for t in 0..steps {
                    let mut v = amplitude * (2.0 * PI * f * t as f64).sin();
                    if params.noise_std > 0.0 {
                        v += noise.sample(&mut rng);
                    }
                    data[[sample, attr, t]] = v;
                }
            }
            labels.push(class);
        }
    }

    let meta = DatasetMeta {
        kind: format!("sine{n_attr}"),
        samples: n,
        attributes: n_attr,
        steps,
        attribute_names: (0..n_attr).map(|i| format!("sine_f{i}")).collect(),
        has_labels: true,
        seed: Some(seed),
        n_per_class: Some(n_per_class),
        frequencies: Some(params.frequencies.clone()),
        class_means: Some(params.class_means.clone()),
        amplitude_std: Some(params.amplitude_std),
        noise_std: Some(params.noise_std),
        fixed_amplitude: params.fixed_amplitude,
    };
    let names = meta.attribute_names.clone();
    Ok(TimeSeriesDataset::new(data, Some(labels))?.with_attribute_names(names)?.with_meta(meta))
}

pub fn gen_sine2(n_per_class: usize, steps: usize, seed: u64, params: Option<SineParams>) -> Result<TimeSeriesDataset> {
    let params = params.unwrap_or_else(SineParams::two_attribute);
    if params.frequencies.len() != 2 {
        return Err(DataError::Argument("two-attribute sine needs two frequencies".into()));
    }
    gen_sine(n_per_class, steps, seed, &params)
}

pub fn gen_sine6(n_per_class: usize, steps: usize, seed: u64, params: Option<SineParams>) -> Result<TimeSeriesDataset> {
    let params = params.unwrap_or_else(SineParams::six_attribute);
    if params.frequencies.len() != 6 {
        return Err(DataError::Argument("six-attribute sine needs six frequencies".into()));
    }
    gen_sine(n_per_class, steps, seed, &params)
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Matched-filter amplitude, written independently of the eval module.
    fn matched(x: &[f64], f: f64) -> f64 {
        let t = x.len() as f64;
        2.0 / t * x.iter().enumerate().map(|(i, v)| v * (2.0 * PI * f * i as f64).sin()).sum::<f64>()
    }

    fn pearson(a: &[f64], b: &[f64]) -> f64 {
        let n = a.len() as f64;
        let (ma, mb) = (a.iter().sum::<f64>() / n, b.iter().sum::<f64>() / n);
        let cov: f64 = a.iter().zip(b).map(|(x, y)| (x - ma) * (y - mb)).sum();
        let va: f64 = a.iter().map(|x| (x - ma).powi(2)).sum();
        let vb: f64 = b.iter().map(|y| (y - mb).powi(2)).sum();
        cov / (va * vb).sqrt()
    }

    #[test]
    fn default_shapes() {
        let d2 = gen_sine2(1024, 800, 0, None).unwrap();
        assert_eq!(d2.data().dim(), (2048, 2, 800));
        let d6 = gen_sine6(1024, 800, 0, None).unwrap();
        assert_eq!(d6.data().dim(), (2048, 6, 800));
        assert_eq!(d6.frequencies().unwrap(), &SIX_ATTRIBUTE_FREQUENCIES);
        assert_eq!(d2.labels().unwrap().iter().filter(|&&l| l == 1).count(), 1024);
    }

    #[test]
    fn noiseless_formula() {
        let d = gen_sine2(2, 50, 1, Some(SineParams::two_attribute().noiseless(1.0))).unwrap();
        for t in 0..50 {
            assert_eq!(d.data()[[0, 0, t]], (2.0 * PI * 0.01 * t as f64).sin());
        }
    }

    #[test]
    fn noiseless_six_attributes_share_unit_amplitude() {
        let d = gen_sine6(3, 800, 1, Some(SineParams::six_attribute().noiseless(1.0))).unwrap();
        for n in 0..d.n_samples() {
            for (a, &f) in SIX_ATTRIBUTE_FREQUENCIES.iter().enumerate() {
                let est = matched(&d.attribute(a).row(n).to_vec(), f);
                assert!((est - 1.0).abs() < 1e-12, "attr {a}: {est}");
            }
        }
    }

    #[test]
    fn amplitudes_coupled_within_sample() {
        let d = gen_sine2(512, 800, 5, None).unwrap();
        let a1: Vec<f64> = (0..d.n_samples()).map(|n| matched(&d.attribute(0).row(n).to_vec(), 0.01)).collect();
        let a2: Vec<f64> = (0..d.n_samples()).map(|n| matched(&d.attribute(1).row(n).to_vec(), 0.005)).collect();
        assert!(pearson(&a1, &a2) > 0.95);
    }

    #[test]
    fn class_means_separate() {
        let n = 2000;
        let params = SineParams { noise_std: 0.0, ..SineParams::two_attribute() };
        let d = gen_sine2(n, 800, 9, Some(params)).unwrap();
        let tol = 3.0 * 0.05 / (n as f64).sqrt();
        for (class, target) in [(0usize, 0.4), (1, 0.6)] {
            let mean = (0..n)
                .map(|i| matched(&d.attribute(0).row(class * n + i).to_vec(), 0.01))
                .sum::<f64>()
                / n as f64;
            assert!((mean - target).abs() < tol, "class {class}: {mean}");
        }
    }

    #[test]
    fn rejects_bad_dims() {
        assert!(gen_sine2(0, 10, 0, None).is_err());
        assert!(gen_sine2(1, 1, 0, None).is_err());
    }

    #[test]
    fn seeded() {
        assert_eq!(gen_sine2(4, 20, 3, None).unwrap(), gen_sine2(4, 20, 3, None).unwrap());
        assert_ne!(gen_sine2(4, 20, 3, None).unwrap(), gen_sine2(4, 20, 4, None).unwrap());
    }
}
