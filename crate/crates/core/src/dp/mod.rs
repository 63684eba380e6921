//! First-layer clip-and-noise Gaussian mechanism.
//!
//! The flattened first-layer gradient (weights then bias) of a protected
//! model is scaled by `1 / max(1, ‖g‖₂ / C)` and perturbed with i.i.d.
//! `N(0, (2Cσ)²)` noise. Replacing one record of the mini-batch moves the
//! clipped gradient by at most `2C`, which is the sensitivity the
//! accountant assumes.

use ndarray::Array2;
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::nn::{GradientSet, MlpModel, NnError};
use crate::scalar::Scalar;
use crate::seed::{stream, StreamRng};

#[derive(Debug, Error)]
pub enum DpError {
    #[error("invalid mechanism parameters: {0}")]
    Params(String),
    #[error("batch pair {trial} is not adjacent: {differing} rows differ")]
    NotAdjacent { trial: usize, differing: usize },
    #[error("batch pair {trial} has mismatched shapes")]
    PairShape { trial: usize },
    #[error(transparent)]
    Nn(#[from] NnError),
}

/// Clipping bound `C` and noise multiplier `σ`.
///
/// A private mechanism has finite `C > 0` and `σ > 0`. [`DpParams::passthrough`]
/// (`C = ∞`, `σ = 0`) is accepted as well: it runs the full clip/noise code
/// path while leaving every gradient bit unchanged.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DpParams {
    pub clip: f64,
    pub sigma: f64,
}

impl DpParams {
    pub fn new(clip: f64, sigma: f64) -> Result<Self, DpError> {
        let p = Self { clip, sigma };
        p.validate()?;
        if !p.is_private() {
            return Err(DpError::Params(format!("need finite C > 0 and σ > 0, got C={clip}, σ={sigma}")));
        }
        Ok(p)
    }

    pub fn passthrough() -> Self {
        Self { clip: f64::INFINITY, sigma: 0.0 }
    }

    pub fn is_private(&self) -> bool {
        self.clip.is_finite() && self.clip > 0.0 && self.sigma.is_finite() && self.sigma > 0.0
    }

    /// Accepts private parameters and the degenerate `σ = 0` forms.
    pub fn validate(&self) -> Result<(), DpError> {
        if self.clip.is_nan() || self.clip <= 0.0 {
            return Err(DpError::Params(format!("clipping bound must be > 0, got {}", self.clip)));
        }
        if !self.sigma.is_finite() || self.sigma < 0.0 {
            return Err(DpError::Params(format!("noise multiplier must be finite and ≥ 0, got {}", self.sigma)));
        }
        if self.sigma > 0.0 && self.clip.is_infinite() {
            return Err(DpError::Params("noise with an infinite clipping bound is unbounded".into()));
        }
        Ok(())
    }

    /// Per-coordinate noise standard deviation `2Cσ`.
    pub fn noise_std(&self) -> f64 {
        if self.sigma == 0.0 {
            0.0
        } else {
            2.0 * self.clip * self.sigma
        }
    }
}

/// Scales the first-layer gradient in place so its L2 norm is at most
/// `clip`. Returns the pre-clip norm.
///
/// Floating-point rounding can leave `‖g / (‖g‖/C)‖` a few ulps above `C`;
/// the factor is nudged down until the bound holds exactly.
pub fn clip_first_layer_in_place<T: Scalar>(grads: &mut GradientSet<T>, clip: f64) -> T {
    let first = grads.first_layer_mut();
    let norm = first.norm();
    let c = T::from_f64_lossy(clip);
    if clip.is_infinite() || norm <= c {
        return norm;
    }
    let original = first.clone();
    let mut factor = c / norm;
    loop {
        first.scale(factor);
        if first.norm() <= c {
            return norm;
        }
        *first = original.clone();
        factor = factor * (T::one() - T::epsilon());
    }
}

pub fn clip_first_layer<T: Scalar>(grads: &GradientSet<T>, clip: f64) -> GradientSet<T> {
    let mut out = grads.clone();
    clip_first_layer_in_place(&mut out, clip);
    out
}

/// Private noise source for one protected model.
#[derive(Debug, Clone)]
pub struct NoiseStream {
    rng: StreamRng,
}

impl NoiseStream {
    pub fn new(master_seed: u64, tag: &str) -> Self {
        Self { rng: stream(master_seed, tag) }
    }

    pub fn from_rng(rng: StreamRng) -> Self {
        Self { rng }
    }

    pub fn rng(&mut self) -> &mut StreamRng {
        &mut self.rng
    }
}

/// Clips (when needed) and adds `N(0, (2Cσ)²)` to every first-layer
/// coordinate. With `σ = 0` no noise is drawn, so the stream is untouched.
pub fn perturb_first_layer_in_place<T: Scalar, R: Rng + ?Sized>(grads: &mut GradientSet<T>, params: &DpParams, rng: &mut R) {
    clip_first_layer_in_place(grads, params.clip);
    let std = params.noise_std();
    if std == 0.0 {
        return;
    }
    for g in grads.first_layer_mut().iter_mut() {
        let z: f64 = StandardNormal.sample(rng);
        *g += T::from_f64_lossy(std * z);
    }
}

pub fn perturb_first_layer<T: Scalar, R: Rng + ?Sized>(grads: &GradientSet<T>, params: &DpParams, rng: &mut R) -> GradientSet<T> {
    let mut out = grads.clone();
    perturb_first_layer_in_place(&mut out, params, rng);
    out
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SensitivityReport {
    pub trials: usize,
    pub clip: f64,
    /// Largest `‖clip(g(b)) − clip(g(b′))‖₂` over first-layer coordinates.
    pub max_difference: f64,
    /// Largest pre-clip first-layer difference, for context.
    pub max_raw_difference: f64,
}

impl SensitivityReport {
    pub fn bound(&self) -> f64 {
        2.0 * self.clip
    }
}

fn differing_rows<T: Scalar>(a: &Array2<T>, b: &Array2<T>) -> usize {
    let same = |p: &T, q: &T| p == q || (p.is_nan() && q.is_nan());
    a.rows().into_iter().zip(b.rows()).filter(|(x, y)| !x.iter().zip(y.iter()).all(|(p, q)| same(p, q))).count()
}

/// Empirical sensitivity of the clipped first-layer gradient.
///
/// For each trial a fresh model and a mini-batch pair are drawn; the pair
/// must differ in at most one row. `gradient` maps (model, batch) to the
/// parameter gradient the mechanism would clip.
pub fn sensitivity_check<T, M, P, G>(
    mut model_factory: M,
    mut pair_generator: P,
    gradient: G,
    clip: f64,
    trials: usize,
) -> Result<SensitivityReport, DpError>
where
    T: Scalar,
    M: FnMut(usize) -> MlpModel<T>,
    P: FnMut(usize) -> (Array2<T>, Array2<T>),
    G: Fn(&MlpModel<T>, &Array2<T>) -> Result<GradientSet<T>, NnError>,
{
    if !(clip > 0.0 && clip.is_finite()) {
        return Err(DpError::Params(format!("clipping bound must be finite and > 0, got {clip}")));
    }
    let mut report = SensitivityReport { trials, clip, max_difference: 0.0, max_raw_difference: 0.0 };
    for trial in 0..trials {
        let model = model_factory(trial);
        let (a, b) = pair_generator(trial);
        if a.dim() != b.dim() {
            return Err(DpError::PairShape { trial });
        }
        let differing = differing_rows(&a, &b);
        if differing > 1 {
            return Err(DpError::NotAdjacent { trial, differing });
        }
        let ga = gradient(&model, &a)?;
        let gb = gradient(&model, &b)?;
        let diff = |x: &GradientSet<T>, y: &GradientSet<T>| -> f64 {
            x.first_layer()
                .iter()
                .zip(y.first_layer().iter())
                .map(|(&p, &q)| (p - q).as_f64().powi(2))
                .sum::<f64>()
                .sqrt()
        };
        report.max_raw_difference = report.max_raw_difference.max(diff(&ga, &gb));
        let (ca, cb) = (clip_first_layer(&ga, clip), clip_first_layer(&gb, clip));
        report.max_difference = report.max_difference.max(diff(&ca, &cb));
    }
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::{Activation, Layer, LayerGrad};
    use ndarray::{arr1, arr2, Array1};
    use rand::SeedableRng;

    fn single(weight: Vec<f64>, bias: f64) -> GradientSet<f64> {
        let n = weight.len();
        let deep = LayerGrad { weight: Array2::from_elem((1, 1), 7.0), bias: arr1(&[-3.0]) };
        GradientSet {
            layers: vec![LayerGrad { weight: Array2::from_shape_vec((1, n), weight).unwrap(), bias: arr1(&[bias]) }, deep],
        }
    }

    #[test]
    fn clip_examples() {
        let g = single(vec![6.0, 8.0], 0.0);
        let c = clip_first_layer(&g, 1.0);
        assert!(c.first_layer().norm() <= 1.0);
        assert!((c.first_layer().norm() - 1.0).abs() < 1e-15);
        assert!((c.first_layer().weight[[0, 0]] / c.first_layer().weight[[0, 1]] - 0.75).abs() < 1e-15);
        assert!(c.layers[1].weight == g.layers[1].weight && c.layers[1].bias == g.layers[1].bias);

        let small = single(vec![0.3, 0.4], 0.0);
        assert_eq!(clip_first_layer(&small, 1.0), small);
        let boundary = single(vec![3.0, 0.0], 4.0);
        assert_eq!(clip_first_layer(&boundary, 5.0), boundary);
    }

    #[test]
    fn clip_bound_is_exact_under_rounding() {
        let mut rng = StreamRng::seed_from_u64(3);
        for _ in 0..2000 {
            let w: Vec<f64> = (0..37).map(|_| rng.random::<f64>() * 1e3 - 5e2).collect();
            let c = rng.random::<f64>() * 2.0 + 1e-6;
            assert!(clip_first_layer(&single(w, 1.0), c).first_layer().norm() <= c);
        }
    }

    #[test]
    fn zero_sigma_equals_clip() {
        let g = single(vec![6.0, 8.0], 1.0);
        let mut noise = NoiseStream::new(0, "t");
        let before = noise.rng().clone();
        let params = DpParams { clip: 2.0, sigma: 0.0 };
        assert_eq!(perturb_first_layer(&g, &params, noise.rng()), clip_first_layer(&g, 2.0));
        assert_eq!(noise.rng().random::<u64>(), before.clone().random::<u64>());
    }

    #[test]
    fn passthrough_is_bitwise_identity() {
        let g = single(vec![1e300, -2.5e-300], 3.0);
        let mut rng = StreamRng::seed_from_u64(0);
        assert!(perturb_first_layer(&g, &DpParams::passthrough(), &mut rng).bit_eq(&g));
    }

    #[test]
    fn noise_touches_first_layer_only() {
        let g = single(vec![0.1, 0.2], 0.3);
        let mut rng = StreamRng::seed_from_u64(1);
        let p = perturb_first_layer(&g, &DpParams::new(1.0, 1.0).unwrap(), &mut rng);
        assert!(p.first_layer().iter().zip(g.first_layer().iter()).all(|(a, b)| a != b));
        assert!(p.layers[1].weight[[0, 0]].to_bits() == 7f64.to_bits() && p.layers[1].bias[0].to_bits() == (-3f64).to_bits());
    }

    #[test]
    fn params_validation() {
        assert!(DpParams::new(0.0, 1.0).is_err());
        assert!(DpParams::new(1.0, 0.0).is_err());
        assert!(DpParams { clip: f64::INFINITY, sigma: 1.0 }.validate().is_err());
        assert!(DpParams::passthrough().validate().is_ok());
        assert_eq!(DpParams::new(0.5, 3.0).unwrap().noise_std(), 3.0);
    }

    fn linear_model() -> MlpModel<f64> {
        let l = Layer::new(arr2(&[[0.5, -0.2]]), arr1(&[0.1]), Activation::Identity).unwrap();
        MlpModel::from_layers(vec![l]).unwrap()
    }

    fn sum_gradient(model: &MlpModel<f64>, batch: &Array2<f64>) -> Result<GradientSet<f64>, NnError> {
        let trace = model.forward(batch)?;
        let ones = Array2::ones(trace.output().raw_dim());
        Ok(model.backward(&trace, &ones)?.0)
    }

    #[test]
    fn identical_pairs_have_zero_sensitivity() {
        let x = arr2(&[[1.0, 2.0], [3.0, 4.0]]);
        let r = sensitivity_check(|_| linear_model(), |_| (x.clone(), x.clone()), sum_gradient, 1.0, 3).unwrap();
        assert_eq!(r.max_difference, 0.0);
    }

    #[test]
    fn non_adjacent_pairs_rejected() {
        let x = arr2(&[[1.0, 2.0], [3.0, 4.0]]);
        let y = arr2(&[[0.0, 2.0], [3.0, 0.0]]);
        let err = sensitivity_check(|_| linear_model(), |_| (x.clone(), y.clone()), sum_gradient, 1.0, 1).unwrap_err();
        assert!(matches!(err, DpError::NotAdjacent { differing: 2, .. }));
    }

    #[test]
    fn adversarial_replacement_bounded() {
        let x = arr2(&[[1.0, 2.0], [3.0, 4.0]]);
        let mut y = x.clone();
        y.row_mut(1).assign(&Array1::from(vec![-1e6, 1e6]));
        let r = sensitivity_check(|_| linear_model(), |_| (x.clone(), y.clone()), sum_gradient, 0.7, 1).unwrap();
        assert!(r.max_raw_difference > 1e5);
        assert!(r.max_difference <= 1.4 + 1e-12);
    }
}
