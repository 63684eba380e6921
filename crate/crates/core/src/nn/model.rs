use ndarray::{Array1, Array2, Axis, Zip};
use rand::Rng;
use rand_distr::{Distribution, Uniform};

use super::activation::Activation;
use super::error::{NnError, Result};
use super::grad::{GradientSet, LayerGrad};
use crate::scalar::Scalar;

/// Dense layer `y = act(x Wᵀ + b)` with `weight` shaped `(out, in)`.
#[derive(Debug, Clone, PartialEq)]
pub struct Layer<T: Scalar> {
    pub weight: Array2<T>,
    pub bias: Array1<T>,
    pub activation: Activation,
}

impl<T: Scalar> Layer<T> {
    pub fn new(weight: Array2<T>, bias: Array1<T>, activation: Activation) -> Result<Self> {
        if weight.nrows() != bias.len() {
            return Err(NnError::InvalidModel(format!(
                "bias length {} does not match {} output rows",
                bias.len(),
                weight.nrows()
            )));
        }
        if weight.is_empty() {
            return Err(NnError::InvalidModel("layer with zero width".into()));
        }
        if !activation.is_valid() {
            return Err(NnError::InvalidModel(format!("invalid activation {activation:?}")));
        }
        Ok(Self { weight, bias, activation })
    }

    /// Glorot-uniform weights, zero bias.
    pub fn xavier<R: Rng + ?Sized>(inputs: usize, outputs: usize, activation: Activation, rng: &mut R) -> Result<Self> {
        if inputs == 0 || outputs == 0 {
            return Err(NnError::InvalidModel("layer dims must be > 0".into()));
        }
        let limit = (6.0 / (inputs + outputs) as f64).sqrt();
        let dist = Uniform::new(-limit, limit).expect("finite Xavier bounds");
        let weight = Array2::from_shape_simple_fn((outputs, inputs), || T::from_f64_lossy(dist.sample(rng)));
        Self::new(weight, Array1::zeros(outputs), activation)
    }

    pub fn inputs(&self) -> usize {
        self.weight.ncols()
    }

    pub fn outputs(&self) -> usize {
        self.weight.nrows()
    }

    fn is_finite(&self) -> bool {
        self.weight.iter().chain(self.bias.iter()).all(|v| v.is_finite())
    }
}

/// Feed-forward network of dense layers. Layer 0 is the affine layer whose
/// gradient the DP mechanism clips and perturbs.
#[derive(Debug, Clone)]
pub struct MlpModel<T: Scalar> {
    layers: Vec<Layer<T>>,
    revision: u64,
}

/// Intermediate values of one forward pass, kept for [`MlpModel::backward`].
#[derive(Debug, Clone)]
pub struct ActivationTrace<T: Scalar> {
    revision: u64,
    shapes: Vec<(usize, usize)>,
    /// `activations[0]` is the input; `activations[i + 1]` the output of layer `i`.
    activations: Vec<Array2<T>>,
    pre_activations: Vec<Array2<T>>,
}

impl<T: Scalar> ActivationTrace<T> {
    pub fn output(&self) -> &Array2<T> {
        self.activations.last().expect("trace holds at least the input")
    }

    pub fn input(&self) -> &Array2<T> {
        &self.activations[0]
    }

    pub fn pre_activations(&self) -> &[Array2<T>] {
        &self.pre_activations
    }

    pub fn into_output(mut self) -> Array2<T> {
        self.activations.pop().expect("trace holds at least the input")
    }

    /// Smallest |pre-activation| over layers with a kinked activation; finite
    /// differences are unreliable when this is below the step size.
    pub fn min_kink_distance(&self, model: &MlpModel<T>) -> f64 {
        model
            .layers
            .iter()
            .zip(&self.pre_activations)
            .filter(|(l, _)| l.activation.has_kink())
            .flat_map(|(_, z)| z.iter().map(|v| v.abs().as_f64()))
            .fold(f64::INFINITY, f64::min)
    }
}

impl<T: Scalar> MlpModel<T> {
    pub fn from_layers(layers: Vec<Layer<T>>) -> Result<Self> {
        if layers.is_empty() {
            return Err(NnError::InvalidModel("model needs at least one layer".into()));
        }
        for (i, pair) in layers.windows(2).enumerate() {
            if pair[0].outputs() != pair[1].inputs() {
                return Err(NnError::InvalidModel(format!(
                    "layer {i} outputs {} but layer {} expects {}",
                    pair[0].outputs(),
                    i + 1,
                    pair[1].inputs()
                )));
            }
        }
        if !layers.iter().all(Layer::is_finite) {
            return Err(NnError::InvalidModel("non-finite parameter".into()));
        }
        Ok(Self { layers, revision: 0 })
    }

    /// Builds a network with widths `dims[0] → dims[1] → … → dims[n]`; every
    /// layer but the last uses `hidden`, the last uses `head`.
    pub fn xavier<R: Rng + ?Sized>(dims: &[usize], hidden: Activation, head: Activation, rng: &mut R) -> Result<Self> {
        if dims.len() < 2 {
            return Err(NnError::InvalidModel("need an input and an output width".into()));
        }
        let n = dims.len() - 1;
        let layers = (0..n)
            .map(|i| {
                let act = if i + 1 == n { head } else { hidden };
                Layer::xavier(dims[i], dims[i + 1], act, rng)
            })
            .collect::<Result<Vec<_>>>()?;
        Self::from_layers(layers)
    }

    pub fn layers(&self) -> &[Layer<T>] {
        &self.layers
    }

    /// Mutable access to the parameters. Invalidates outstanding traces.
    pub fn layers_mut(&mut self) -> &mut [Layer<T>] {
        self.revision += 1;
        &mut self.layers
    }

    pub fn revision(&self) -> u64 {
        self.revision
    }

    pub fn input_width(&self) -> usize {
        self.layers[0].inputs()
    }

    pub fn output_width(&self) -> usize {
        self.layers.last().map(Layer::outputs).unwrap_or(0)
    }

    pub fn param_count(&self) -> usize {
        self.layers.iter().map(|l| l.weight.len() + l.bias.len()).sum()
    }

    pub fn is_finite(&self) -> bool {
        self.layers.iter().all(Layer::is_finite)
    }

    fn shapes(&self) -> Vec<(usize, usize)> {
        self.layers.iter().map(|l| l.weight.dim()).collect()
    }

    /// Bitwise parameter equality.
    pub fn bit_eq(&self, other: &Self) -> bool {
        self.layers.len() == other.layers.len()
            && self.layers.iter().zip(&other.layers).all(|(a, b)| {
                a.activation == b.activation
                    && a.weight.dim() == b.weight.dim()
                    && a.weight
                        .iter()
                        .chain(a.bias.iter())
                        .zip(b.weight.iter().chain(b.bias.iter()))
                        .all(|(x, y)| x.as_f64().to_bits() == y.as_f64().to_bits())
            })
    }

    fn check_input(&self, batch: &Array2<T>) -> Result<()> {
        if batch.nrows() == 0 {
            return Err(NnError::Shape("empty batch".into()));
        }
        if batch.ncols() != self.input_width() {
            return Err(NnError::Shape(format!(
                "batch width {} but model expects {}",
                batch.ncols(),
                self.input_width()
            )));
        }
        if !batch.iter().all(|v| v.is_finite()) {
            return Err(NnError::Domain("non-finite input".into()));
        }
        Ok(())
    }

    /// Forward pass over a `B × in` batch, keeping everything backward needs.
    pub fn forward(&self, batch: &Array2<T>) -> Result<ActivationTrace<T>> {
        self.check_input(batch)?;
        let mut activations = Vec::with_capacity(self.layers.len() + 1);
        let mut pre_activations = Vec::with_capacity(self.layers.len());
        activations.push(batch.to_owned());
        for layer in &self.layers {
            let x = activations.last().expect("non-empty");
            let mut z = x.dot(&layer.weight.t());
            z += &layer.bias;
            let act = layer.activation;
            let a = z.mapv(|v| act.apply(v));
            pre_activations.push(z);
            activations.push(a);
        }
        let trace = ActivationTrace {
            revision: self.revision,
            shapes: self.shapes(),
            activations,
            pre_activations,
        };
        if !trace.output().iter().all(|v| v.is_finite()) {
            return Err(NnError::Domain("non-finite output".into()));
        }
        Ok(trace)
    }

    /// Output only.
    pub fn predict(&self, batch: &Array2<T>) -> Result<Array2<T>> {
        Ok(self.forward(batch)?.into_output())
    }

    fn check_trace(&self, trace: &ActivationTrace<T>, output_grad: &Array2<T>) -> Result<()> {
        if trace.revision != self.revision || trace.shapes != self.shapes() {
            return Err(NnError::Contract("trace was produced by a different model state".into()));
        }
        if output_grad.dim() != trace.output().dim() {
            return Err(NnError::Shape(format!(
                "output gradient {:?} does not match output {:?}",
                output_grad.dim(),
                trace.output().dim()
            )));
        }
        Ok(())
    }

    fn local_delta(layer: &Layer<T>, z: &Array2<T>, a: &Array2<T>, upstream: &Array2<T>) -> Array2<T> {
        let act = layer.activation;
        let mut delta = upstream.to_owned();
        Zip::from(&mut delta)
            .and(z)
            .and(a)
            .for_each(|d, &zv, &av| *d *= act.derivative(zv, av));
        delta
    }

    /// Gradients of `Σ_b ⟨output_b, output_grad_b⟩` with respect to every
    /// parameter and to the input batch.
    pub fn backward(&self, trace: &ActivationTrace<T>, output_grad: &Array2<T>) -> Result<(GradientSet<T>, Array2<T>)> {
        self.check_trace(trace, output_grad)?;
        let mut layers = Vec::with_capacity(self.layers.len());
        let mut upstream = output_grad.to_owned();
        for (i, layer) in self.layers.iter().enumerate().rev() {
            let delta = Self::local_delta(layer, &trace.pre_activations[i], &trace.activations[i + 1], &upstream);
            let weight = delta.t().dot(&trace.activations[i]);
            let bias = delta.sum_axis(Axis(0));
            upstream = delta.dot(&layer.weight);
            layers.push(LayerGrad { weight, bias });
        }
        layers.reverse();
        Ok((GradientSet { layers }, upstream))
    }

    /// Input gradient only; skips the parameter-gradient products.
    pub fn input_gradient(&self, trace: &ActivationTrace<T>, output_grad: &Array2<T>) -> Result<Array2<T>> {
        self.check_trace(trace, output_grad)?;
        let mut upstream = output_grad.to_owned();
        for (i, layer) in self.layers.iter().enumerate().rev() {
            let delta = Self::local_delta(layer, &trace.pre_activations[i], &trace.activations[i + 1], &upstream);
            upstream = delta.dot(&layer.weight);
        }
        Ok(upstream)
    }
}
