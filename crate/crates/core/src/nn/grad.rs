use ndarray::{Array1, Array2, Zip};

use super::error::{NnError, Result};
use super::model::MlpModel;
use crate::scalar::Scalar;

/// Gradient of one dense layer.
#[derive(Debug, Clone, PartialEq)]
pub struct LayerGrad<T: Scalar> {
    pub weight: Array2<T>,
    pub bias: Array1<T>,
}

impl<T: Scalar> LayerGrad<T> {
    pub fn sq_norm(&self) -> T {
        self.weight.iter().chain(self.bias.iter()).map(|&g| g * g).sum()
    }

    pub fn norm(&self) -> T {
        self.sq_norm().sqrt()
    }

    pub fn scale(&mut self, factor: T) {
        self.weight.mapv_inplace(|g| g * factor);
        self.bias.mapv_inplace(|g| g * factor);
    }

    pub fn len(&self) -> usize {
        self.weight.len() + self.bias.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Weights (row-major) followed by bias.
    pub fn iter(&self) -> impl Iterator<Item = &T> {
        self.weight.iter().chain(self.bias.iter())
    }

    pub fn iter_mut(&mut self) -> impl Iterator<Item = &mut T> {
        self.weight.iter_mut().chain(self.bias.iter_mut())
    }
}

/// Per-layer parameter gradients, shape-congruent with an [`MlpModel`].
#[derive(Debug, Clone, PartialEq)]
pub struct GradientSet<T: Scalar> {
    pub layers: Vec<LayerGrad<T>>,
}

impl<T: Scalar> GradientSet<T> {
    pub fn zeros_like(model: &MlpModel<T>) -> Self {
        let layers = model
            .layers()
            .iter()
            .map(|l| LayerGrad {
                weight: Array2::zeros(l.weight.raw_dim()),
                bias: Array1::zeros(l.bias.raw_dim()),
            })
            .collect();
        Self { layers }
    }

    /// The gradient of the first (affine) layer, the one the DP mechanism protects.
    pub fn first_layer(&self) -> &LayerGrad<T> {
        &self.layers[0]
    }

    pub fn first_layer_mut(&mut self) -> &mut LayerGrad<T> {
        &mut self.layers[0]
    }

    pub fn is_congruent(&self, model: &MlpModel<T>) -> bool {
        self.layers.len() == model.layers().len()
            && self
                .layers
                .iter()
                .zip(model.layers())
                .all(|(g, l)| g.weight.dim() == l.weight.dim() && g.bias.len() == l.bias.len())
    }

    pub fn is_finite(&self) -> bool {
        self.layers.iter().all(|g| g.iter().all(|v| v.is_finite()))
    }

    pub fn add_assign(&mut self, other: &GradientSet<T>) -> Result<()> {
        if self.layers.len() != other.layers.len() {
            return Err(NnError::Shape("gradient sets differ in depth".into()));
        }
        for (a, b) in self.layers.iter_mut().zip(&other.layers) {
            if a.weight.dim() != b.weight.dim() || a.bias.len() != b.bias.len() {
                return Err(NnError::Shape("gradient layer shapes differ".into()));
            }
            Zip::from(&mut a.weight).and(&b.weight).for_each(|x, &y| *x += y);
            Zip::from(&mut a.bias).and(&b.bias).for_each(|x, &y| *x += y);
        }
        Ok(())
    }

    pub fn scale(&mut self, factor: T) {
        self.layers.iter_mut().for_each(|g| g.scale(factor));
    }

    pub fn l2_norm(&self) -> T {
        self.layers.iter().map(LayerGrad::sq_norm).sum::<T>().sqrt()
    }

    pub fn param_count(&self) -> usize {
        self.layers.iter().map(LayerGrad::len).sum()
    }

    /// Bitwise equality, distinguishing `-0.0` from `0.0`.
    pub fn bit_eq(&self, other: &Self) -> bool {
        self.layers.len() == other.layers.len()
            && self.layers.iter().zip(&other.layers).all(|(a, b)| {
                a.weight.dim() == b.weight.dim()
                    && a.bias.len() == b.bias.len()
                    && a.iter().zip(b.iter()).all(|(x, y)| x.as_f64().to_bits() == y.as_f64().to_bits())
            })
    }
}
