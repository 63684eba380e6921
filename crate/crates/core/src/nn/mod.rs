//! Minimal dense feed-forward engine: layers, explicit backpropagation, Adam.

mod activation;
mod adam;
mod checkpoint;
mod error;
mod grad;
mod gradcheck;
mod model;

pub use activation::Activation;
pub use adam::{adam_step, AdamConfig, AdamState};
pub use checkpoint::{LayerRecord, ModelRecord, FORMAT_VERSION};
pub use error::{NnError, Result};
pub use grad::{GradientSet, LayerGrad};
pub use gradcheck::{finite_diff_check, relative_error, GradCheckReport, DEFAULT_STEP};
pub use model::{ActivationTrace, Layer, MlpModel};

use ndarray::Array2;

/// Numerically safe clamp applied to sigmoid outputs before taking logs.
pub const PROB_CLAMP: f64 = 1e-7;

/// `log(clamp(p))` and its derivative with respect to `p` (zero where clamped).
#[inline]
pub fn clamped_log<T: crate::Scalar>(p: T) -> (T, T) {
    let lo = T::from_f64_lossy(PROB_CLAMP);
    let hi = T::one() - lo;
    if p < lo {
        (lo.ln(), T::zero())
    } else if p > hi {
        (hi.ln(), T::zero())
    } else {
        (p.ln(), T::one() / p)
    }
}

/// Mean over a `B × 1` column of `log(clamp(p))` (or `log(1 − clamp(p))`
/// when `complement`), with its gradient scaled by `weight / B`.
pub fn mean_log<T: crate::Scalar>(probs: &Array2<T>, complement: bool, weight: T) -> (T, Array2<T>) {
    let n = T::from_usize(probs.len()).expect("batch size fits");
    let mut total = T::zero();
    let grad = probs.mapv(|p| {
        if complement {
            let (v, d) = clamped_log(T::one() - p);
            total += v;
            -d * weight / n
        } else {
            let (v, d) = clamped_log(p);
            total += v;
            d * weight / n
        }
    });
    (total / n, grad)
}
