//! Central finite-difference verification of [`MlpModel::backward`].

use ndarray::Array2;

use super::error::Result;
use super::model::MlpModel;
use crate::scalar::Scalar;

pub const DEFAULT_STEP: f64 = 1e-6;
const ERROR_FLOOR: f64 = 1e-12;

/// Worst relative errors found by [`finite_diff_check`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GradCheckReport {
    pub parameters: f64,
    pub input: f64,
}

impl GradCheckReport {
    pub fn max(&self) -> f64 {
        self.parameters.max(self.input)
    }
}

pub fn relative_error(analytic: f64, numeric: f64) -> f64 {
    (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(ERROR_FLOOR)
}

/// Compares the analytic gradient of `loss(model(input))` against central
/// differences with step `h`. `loss` returns the scalar value and its gradient
/// with respect to the model output.
pub fn finite_diff_check<T, L>(model: &MlpModel<T>, input: &Array2<T>, loss: L, h: f64) -> Result<GradCheckReport>
where
    T: Scalar,
    L: Fn(&Array2<T>) -> (T, Array2<T>),
{
    let trace = model.forward(input)?;
    let (_, out_grad) = loss(trace.output());
    let (grads, input_grad) = model.backward(&trace, &out_grad)?;
    let eval = |m: &MlpModel<T>, x: &Array2<T>| -> Result<f64> { Ok(loss(&m.predict(x)?).0.as_f64()) };
    let step = T::from_f64_lossy(h);

    let mut probe = model.clone();
    let mut worst_param = 0.0_f64;
    for li in 0..model.layers().len() {
        let (rows, cols) = model.layers()[li].weight.dim();
        for r in 0..rows {
            for c in 0..cols {
                let orig = model.layers()[li].weight[[r, c]];
                probe.layers_mut()[li].weight[[r, c]] = orig + step;
                let plus = eval(&probe, input)?;
                probe.layers_mut()[li].weight[[r, c]] = orig - step;
                let minus = eval(&probe, input)?;
                probe.layers_mut()[li].weight[[r, c]] = orig;
                let numeric = (plus - minus) / (2.0 * h);
                worst_param = worst_param.max(relative_error(grads.layers[li].weight[[r, c]].as_f64(), numeric));
            }
            let orig = model.layers()[li].bias[r];
            probe.layers_mut()[li].bias[r] = orig + step;
            let plus = eval(&probe, input)?;
            probe.layers_mut()[li].bias[r] = orig - step;
            let minus = eval(&probe, input)?;
            probe.layers_mut()[li].bias[r] = orig;
            let numeric = (plus - minus) / (2.0 * h);
            worst_param = worst_param.max(relative_error(grads.layers[li].bias[r].as_f64(), numeric));
        }
    }

    let mut x = input.clone();
    let mut worst_input = 0.0_f64;
    for idx in 0..x.len() {
        let pos = (idx / x.ncols(), idx % x.ncols());
        let orig = x[pos];
        x[pos] = orig + step;
        let plus = eval(model, &x)?;
        x[pos] = orig - step;
        let minus = eval(model, &x)?;
        x[pos] = orig;
        let numeric = (plus - minus) / (2.0 * h);
        worst_input = worst_input.max(relative_error(input_grad[pos].as_f64(), numeric));
    }

    Ok(GradCheckReport { parameters: worst_param, input: worst_input })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::{Activation, Layer};
    use ndarray::{array, Array1};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn quadratic(out: &Array2<f64>) -> (f64, Array2<f64>) {
        (out.iter().map(|v| 0.5 * v * v).sum(), out.clone())
    }

    fn random_input(rng: &mut ChaCha8Rng, rows: usize, cols: usize) -> Array2<f64> {
        Array2::from_shape_simple_fn((rows, cols), || rng.random_range(-1.0..1.0))
    }

    #[test]
    fn linear_model_quadratic_loss() {
        let layer = Layer::new(array![[0.3, -0.2], [0.5, 0.1]], Array1::from(vec![0.1, -0.4]), Activation::Identity).unwrap();
        let model = MlpModel::from_layers(vec![layer]).unwrap();
        let report = finite_diff_check(&model, &array![[1.0, 2.0], [-0.5, 0.25]], quadratic, DEFAULT_STEP).unwrap();
        assert!(report.max() < 1e-9, "{report:?}");
    }

    #[test]
    fn tanh_two_layer() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let model = MlpModel::xavier(&[4, 6, 3], Activation::Tanh, Activation::Identity, &mut rng).unwrap();
        let x = random_input(&mut rng, 5, 4);
        let report = finite_diff_check(&model, &x, quadratic, DEFAULT_STEP).unwrap();
        assert!(report.max() < 1e-5, "{report:?}");
    }

    #[test]
    fn relu_away_from_kinks() {
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        let model = MlpModel::xavier(&[4, 8, 2], Activation::Relu, Activation::Sigmoid, &mut rng).unwrap();
        let mut checked = 0;
        for _ in 0..20 {
            let x = random_input(&mut rng, 3, 4);
            if model.forward(&x).unwrap().min_kink_distance(&model) < 1e-4 {
                continue;
            }
            let report = finite_diff_check(&model, &x, quadratic, DEFAULT_STEP).unwrap();
            assert!(report.max() < 1e-5, "{report:?}");
            checked += 1;
        }
        assert!(checked > 0);
    }
}
