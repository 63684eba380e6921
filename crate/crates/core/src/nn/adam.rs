use ndarray::Zip;
use serde::{Deserialize, Serialize};

use super::error::{NnError, Result};
use super::grad::GradientSet;
use super::model::MlpModel;
use crate::scalar::Scalar;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AdamConfig {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl Default for AdamConfig {
    /// GAN-typical settings.
    fn default() -> Self {
        Self { lr: 2e-4, beta1: 0.5, beta2: 0.999, eps: 1e-8 }
    }
}

impl AdamConfig {
    pub fn with_lr(self, lr: f64) -> Self {
        Self { lr, ..self }
    }

    pub fn validate(&self) -> Result<()> {
        let ok = self.lr >= 0.0
            && self.lr.is_finite()
            && (0.0..1.0).contains(&self.beta1)
            && (0.0..1.0).contains(&self.beta2)
            && self.eps > 0.0;
        if ok {
            Ok(())
        } else {
            Err(NnError::InvalidModel(format!("invalid Adam hyperparameters {self:?}")))
        }
    }
}

/// First/second moment estimates and step counter for one model.
#[derive(Debug, Clone)]
pub struct AdamState<T: Scalar> {
    pub config: AdamConfig,
    pub m: GradientSet<T>,
    pub v: GradientSet<T>,
    pub step: u64,
}

impl<T: Scalar> AdamState<T> {
    pub fn new(model: &MlpModel<T>, config: AdamConfig) -> Self {
        Self {
            config,
            m: GradientSet::zeros_like(model),
            v: GradientSet::zeros_like(model),
            step: 0,
        }
    }

    /// One bias-corrected Adam update. Non-finite gradients are rejected and
    /// leave both the model and the moments untouched.
    pub fn step(&mut self, model: &mut MlpModel<T>, grads: &GradientSet<T>) -> Result<()> {
        if !grads.is_congruent(model) || !self.m.is_congruent(model) {
            return Err(NnError::Shape("gradient set does not match model".into()));
        }
        if !grads.is_finite() {
            return Err(NnError::Domain("non-finite gradient".into()));
        }
        self.step += 1;
        let c = self.config;
        let b1 = T::from_f64_lossy(c.beta1);
        let b2 = T::from_f64_lossy(c.beta2);
        let one = T::one();
        let lr = T::from_f64_lossy(c.lr);
        let eps = T::from_f64_lossy(c.eps);
        let t = i32::try_from(self.step).unwrap_or(i32::MAX);
        let correction1 = one - b1.powi(t);
        let correction2 = one - b2.powi(t);

        for (((layer, g), m), v) in model
            .layers_mut()
            .iter_mut()
            .zip(&grads.layers)
            .zip(&mut self.m.layers)
            .zip(&mut self.v.layers)
        {
            let update = |p: &mut T, g: &T, m: &mut T, v: &mut T| {
                *m = b1 * *m + (one - b1) * *g;
                *v = b2 * *v + (one - b2) * *g * *g;
                let m_hat = *m / correction1;
                let v_hat = *v / correction2;
                *p -= lr * m_hat / (v_hat.sqrt() + eps);
            };
            Zip::from(&mut layer.weight)
                .and(&g.weight)
                .and(&mut m.weight)
                .and(&mut v.weight)
                .for_each(update);
            Zip::from(&mut layer.bias)
                .and(&g.bias)
                .and(&mut m.bias)
                .and(&mut v.bias)
                .for_each(update);
        }
        Ok(())
    }
}

/// Free-function form of [`AdamState::step`].
pub fn adam_step<T: Scalar>(model: &mut MlpModel<T>, grads: &GradientSet<T>, state: &mut AdamState<T>) -> Result<()> {
    state.step(model, grads)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::{Activation, Layer};
    use ndarray::{array, Array1, Array2};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn scalar_model(w: f64) -> MlpModel<f64> {
        MlpModel::from_layers(vec![Layer::new(array![[w]], array![0.0], Activation::Identity).unwrap()]).unwrap()
    }

    #[test]
    fn zero_gradient_is_a_fixed_point() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let mut model = MlpModel::<f64>::xavier(&[3, 5, 2], Activation::Tanh, Activation::Identity, &mut rng).unwrap();
        let before = model.clone();
        let mut state = AdamState::new(&model, AdamConfig::default());
        let zeros = GradientSet::zeros_like(&model);
        for _ in 0..3 {
            state.step(&mut model, &zeros).unwrap();
        }
        assert!(model.bit_eq(&before));
        assert_eq!(state.step, 3);
    }

    #[test]
    fn zero_lr_updates_moments_only() {
        let mut model = scalar_model(0.7);
        let before = model.clone();
        let mut state = AdamState::new(&model, AdamConfig::default().with_lr(0.0));
        let mut g = GradientSet::zeros_like(&model);
        g.layers[0].weight[[0, 0]] = 2.0;
        state.step(&mut model, &g).unwrap();
        assert!(model.bit_eq(&before));
        assert_eq!(state.m.layers[0].weight[[0, 0]], 1.0);
        assert!(state.v.layers[0].weight[[0, 0]] > 0.0);
    }

    #[test]
    fn first_step_moves_by_lr() {
        let cfg = AdamConfig::default();
        let mut model = scalar_model(1.0);
        let mut state = AdamState::new(&model, cfg);
        let mut g = GradientSet::zeros_like(&model);
        g.layers[0].weight[[0, 0]] = 1.0;
        state.step(&mut model, &g).unwrap();
        // m̂ = 1, v̂ = 1 at t = 1
        let expected = 1.0 - cfg.lr / (1.0 + cfg.eps);
        assert!((model.layers()[0].weight[[0, 0]] - expected).abs() < 1e-15);
    }

    #[test]
    fn non_finite_gradient_is_rejected() {
        let mut model = scalar_model(1.0);
        let before = model.clone();
        let mut state = AdamState::new(&model, AdamConfig::default());
        let g = GradientSet {
            layers: vec![crate::nn::LayerGrad { weight: Array2::from_elem((1, 1), f64::NAN), bias: Array1::zeros(1) }],
        };
        assert!(matches!(state.step(&mut model, &g), Err(NnError::Domain(_))));
        assert!(model.bit_eq(&before));
        assert_eq!(state.step, 0);
    }
}
