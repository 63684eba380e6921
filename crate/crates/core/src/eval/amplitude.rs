use std::f64::consts::PI;

use ndarray::Array2;

use super::wasserstein::wd_1d;
use super::{EvalError, Result};
use crate::data::TimeSeriesDataset;

fn check_frequencies(dataset: &TimeSeriesDataset, frequencies: &[f64]) -> Result<()> {
    if frequencies.len() != dataset.n_attributes() {
        return Err(EvalError::Argument(format!(
            "{} frequencies for {} attributes",
            frequencies.len(),
            dataset.n_attributes()
        )));
    }
    Ok(())
}

fn basis(f: f64, steps: usize) -> Vec<f64> {
    (0..steps).map(|t| (2.0 * PI * f * t as f64).sin()).collect()
}

/// Matched-filter amplitude `â = (2/T) Σ_t x[t] sin(2π f t)` of every
/// (sample, attribute). Exact for noiseless sinusoids when `2fT` is an
/// integer.
pub fn estimate_amplitudes(dataset: &TimeSeriesDataset, frequencies: &[f64]) -> Result<Array2<f64>> {
    check_frequencies(dataset, frequencies)?;
    let steps = dataset.steps();
    let scale = 2.0 / steps as f64;
    let mut out = Array2::zeros((dataset.n_samples(), dataset.n_attributes()));
    for (attr, &f) in frequencies.iter().enumerate() {
        let s = basis(f, steps);
        for n in 0..dataset.n_samples() {
            let row = dataset.data().slice(ndarray::s![n, attr, ..]);
            out[[n, attr]] = scale * row.iter().zip(&s).map(|(x, b)| x * b).sum::<f64>();
        }
    }
    Ok(out)
}

/// Frequencies attached to `dataset`, or an argument error.
pub fn known_frequencies(dataset: &TimeSeriesDataset) -> Result<Vec<f64>> {
    dataset
        .frequencies()
        .map(<[f64]>::to_vec)
        .ok_or_else(|| EvalError::Argument("dataset carries no frequency metadata".into()))
}

/// `Σ_n W₁(A_n, Ã_n)` over attributes of the amplitude distributions.
pub fn amplitude_awd(real: &TimeSeriesDataset, synth: &TimeSeriesDataset, frequencies: &[f64]) -> Result<f64> {
    if real.n_attributes() != synth.n_attributes() || real.steps() != synth.steps() {
        return Err(EvalError::Shape("real and synthetic datasets differ in attributes or length".into()));
    }
    let (a, b) = (estimate_amplitudes(real, frequencies)?, estimate_amplitudes(synth, frequencies)?);
    (0..frequencies.len()).map(|n| wd_1d(&a.column(n).to_vec(), &b.column(n).to_vec())).sum()
}

/// Per-sample ratios `â_{m,1} / â_{m,2}` of two attributes' amplitudes.
pub fn amplitude_ratios(dataset: &TimeSeriesDataset, frequencies: &[f64], first: usize, second: usize) -> Result<Vec<f64>> {
    let a = estimate_amplitudes(dataset, frequencies)?;
    Ok(a.rows().into_iter().map(|r| r[first] / r[second]).collect())
}

/// Mean absolute deviation from the rebuilt ground truth `â sin(2π f t)`,
/// averaged over samples, attributes and steps.
pub fn sine_mae(synth: &TimeSeriesDataset, frequencies: &[f64]) -> Result<f64> {
    let amps = estimate_amplitudes(synth, frequencies)?;
    let steps = synth.steps();
    let mut total = 0.0;
    for (attr, &f) in frequencies.iter().enumerate() {
        let s = basis(f, steps);
        for n in 0..synth.n_samples() {
            let row = synth.data().slice(ndarray::s![n, attr, ..]);
            total += row.iter().zip(&s).map(|(x, b)| (x - amps[[n, attr]] * b).abs()).sum::<f64>();
        }
    }
    Ok(total / (synth.n_samples() * synth.n_attributes() * steps) as f64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::{gen_sine, gen_sine2, SineParams};

    #[test]
    fn matched_filter_exact_on_whole_cycles() {
        let d = gen_sine(1, 800, 0, &SineParams::with_frequencies(vec![0.01]).noiseless(1.0)).unwrap();
        let a = estimate_amplitudes(&d, &[0.01]).unwrap();
        assert!(a.iter().all(|&v| (v - 1.0).abs() < 1e-13));
        let zero = gen_sine(1, 800, 0, &SineParams::with_frequencies(vec![0.01]).noiseless(0.0)).unwrap();
        assert!(estimate_amplitudes(&zero, &[0.01]).unwrap().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn matched_filter_noise_within_standard_error() {
        let params = SineParams { noise_std: 0.05, fixed_amplitude: Some(0.6), ..SineParams::with_frequencies(vec![0.01]) };
        let d = gen_sine(500, 800, 3, &params).unwrap();
        let a = estimate_amplitudes(&d, &[0.01]).unwrap();
        let se = 0.05 * (2.0 / 800.0f64).sqrt();
        assert!(a.iter().all(|&v| (v - 0.6).abs() < 4.5 * se));
        let within = a.iter().filter(|&&v| (v - 0.6).abs() < 3.0 * se).count();
        assert!(within as f64 / a.len() as f64 > 0.98);
        let mean = a.mean().unwrap();
        assert!((mean - 0.6).abs() < 3.0 * se / (a.len() as f64).sqrt());
    }

    #[test]
    fn amplitude_awd_identity_and_shift() {
        let d = gen_sine2(20, 100, 1, None).unwrap();
        let f = known_frequencies(&d).unwrap();
        assert_eq!(amplitude_awd(&d, &d, &f).unwrap(), 0.0);
        // adding 0.1·sin(2π f t) to each attribute shifts every amplitude by 0.1
        let mut shifted = d.data().clone();
        for (attr, &freq) in f.iter().enumerate() {
            let b = basis(freq, 100);
            for n in 0..d.n_samples() {
                for t in 0..100 {
                    shifted[[n, attr, t]] += 0.1 * b[t];
                }
            }
        }
        let s = d.with_values(shifted).unwrap();
        assert!((amplitude_awd(&d, &s, &f).unwrap() - 0.2).abs() < 1e-12);
    }

    #[test]
    fn mae_noiseless_and_noisy() {
        let clean = gen_sine2(5, 100, 0, Some(SineParams::two_attribute().noiseless(0.5))).unwrap();
        assert!(sine_mae(&clean, &[0.01, 0.005]).unwrap() < 1e-12);
        let noisy = gen_sine2(256, 800, 2, None).unwrap();
        let mae = sine_mae(&noisy, &[0.01, 0.005]).unwrap();
        let expected = 0.05 * (2.0 / PI).sqrt();
        assert!((mae - expected).abs() < 0.001, "{mae} vs {expected}");
    }

    #[test]
    fn missing_metadata() {
        let d = TimeSeriesDataset::new(ndarray::Array3::zeros((1, 1, 4)), None).unwrap();
        assert!(known_frequencies(&d).is_err());
        assert!(estimate_amplitudes(&d, &[0.1, 0.2]).is_err());
    }
}
