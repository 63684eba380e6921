use ndarray::{Array2, Axis};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{EvalError, Result};
use crate::data::TimeSeriesDataset;
use crate::scalar::Scalar;

fn sorted<T: Scalar>(values: &[T]) -> Result<Vec<T>> {
    if values.is_empty() {
        return Err(EvalError::Argument("empty sample set".into()));
    }
    if values.iter().any(|v| !v.is_finite()) {
        return Err(EvalError::Argument("non-finite sample value".into()));
    }
    let mut out = values.to_vec();
    out.sort_by(|a, b| a.partial_cmp(b).expect("finite values"));
    Ok(out)
}

/// First-order Wasserstein distance between the empirical distributions of
/// `u` and `v`: `∫ |F_u(x) − F_v(x)| dx`, integrated exactly over the
/// merged breakpoints.
pub fn wd_1d<T: Scalar>(u: &[T], v: &[T]) -> Result<T> {
    let (u, v) = (sorted(u)?, sorted(v)?);
    let (n, m) = (u.len(), v.len());
    let denom = T::from_usize(n).expect("len") * T::from_usize(m).expect("len");
    let (mut i, mut j) = (0usize, 0usize);
    let mut x = if u[0] < v[0] { u[0] } else { v[0] };
    let mut total = T::zero();
    while i < n || j < m {
        let next = match (u.get(i), v.get(j)) {
            (Some(&a), Some(&b)) => if a < b { a } else { b },
            (Some(&a), None) => a,
            (None, Some(&b)) => b,
            (None, None) => unreachable!(),
        };
        // |i/n − j/m| over [x, next), in integer arithmetic where possible
        let gap = (i * m).abs_diff(j * n);
        if gap != 0 {
            total += T::from_usize(gap).expect("gap") * (next - x);
        }
        x = next;
        while i < n && u[i] == x {
            i += 1;
        }
        while j < m && v[j] == x {
            j += 1;
        }
    }
    Ok(total / denom)
}

/// Per-(attribute, step) Wasserstein distances and their mean.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AwdReport {
    pub value: f64,
    /// `|A| × T`.
    pub cells: Array2<f64>,
}

pub fn awd(real: &TimeSeriesDataset, synth: &TimeSeriesDataset) -> Result<AwdReport> {
    if real.n_attributes() != synth.n_attributes() || real.steps() != synth.steps() {
        return Err(EvalError::Shape(format!(
            "real is …×{}×{}, synthetic is …×{}×{}",
            real.n_attributes(),
            real.steps(),
            synth.n_attributes(),
            synth.steps()
        )));
    }
    let (a, t) = (real.n_attributes(), real.steps());
    let values: Vec<f64> = (0..a * t)
        .into_par_iter()
        .map(|cell| {
            let (attr, step) = (cell / t, cell % t);
            let r: Vec<f64> = real.data().index_axis(Axis(1), attr).column(step).to_vec();
            let s: Vec<f64> = synth.data().index_axis(Axis(1), attr).column(step).to_vec();
            wd_1d(&r, &s)
        })
        .collect::<Result<_>>()?;
    let value = values.iter().sum::<f64>() / values.len() as f64;
    Ok(AwdReport { value, cells: Array2::from_shape_vec((a, t), values).expect("cell count") })
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::Array3;

    #[test]
    fn examples() {
        assert_eq!(wd_1d(&[1.0, 2.0, 3.0], &[3.0, 1.0, 2.0]).unwrap(), 0.0);
        assert_eq!(wd_1d(&[0.0], &[5.0]).unwrap(), 5.0);
        assert_eq!(wd_1d(&[0.0, 0.0], &[0.0, 1.0]).unwrap(), 0.5);
        assert_eq!(wd_1d(&[0.0f32], &[2.5]).unwrap(), 2.5f32);
        assert!(wd_1d::<f64>(&[], &[1.0]).is_err());
    }

    #[test]
    fn unequal_sizes() {
        // F_u − F_v = 1/3 on [0,1), −1/3 on [1,2) … via quantiles: mean |Q_u − Q_v|
        let w: f64 = wd_1d(&[0.0, 1.0, 2.0], &[0.0, 2.0]).unwrap();
        assert!((w - 1.0 / 3.0).abs() < 1e-15);
    }

    #[test]
    fn awd_identity_and_translation() {
        let data = Array3::from_shape_fn((5, 2, 3), |(n, a, t)| ((n * 7 + a * 3 + t) % 5) as f64);
        let real = TimeSeriesDataset::new(data.clone(), None).unwrap();
        assert_eq!(awd(&real, &real).unwrap().value, 0.0);
        let shifted = TimeSeriesDataset::new(data.mapv(|v| v - 0.25), None).unwrap();
        let r = awd(&real, &shifted).unwrap();
        assert!((r.value - 0.25).abs() < 1e-15);
        assert_eq!(r.cells.dim(), (2, 3));
        let short = TimeSeriesDataset::new(Array3::zeros((5, 2, 2)), None).unwrap();
        assert!(matches!(awd(&real, &short), Err(EvalError::Shape(_))));
    }
}
