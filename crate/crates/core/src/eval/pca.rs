//! Two-component PCA for visual comparison of real and synthetic samples.
//!
//! Components are fitted on the real dataset alone and applied to every
//! dataset passed in. The covariance is never materialized: power iteration
//! multiplies by `Xᵀ X` through two matrix-vector products, and deflation
//! re-orthogonalizes against components already found.

use ndarray::{Array1, Array2, Axis};
use serde::{Deserialize, Serialize};

use super::{EvalError, Result};
use crate::data::TimeSeriesDataset;

const MAX_ITERATIONS: usize = 100_000;
const TOLERANCE: f64 = 1e-13;
/// Eigenvalues below this fraction of the total variance count as zero.
const RANK_FLOOR: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PcaProjection {
    /// Row `k` is component `k` (length `|A|·T`).
    pub components: Array2<f64>,
    /// Covariance eigenvalue of each component.
    pub explained_variance: Vec<f64>,
    pub mean: Array1<f64>,
    /// One `N_d × k` matrix per input dataset (real first).
    pub coordinates: Vec<Array2<f64>>,
    /// True when the real data had fewer than two non-trivial directions;
    /// coordinates are then one-dimensional.
    pub rank_deficient: bool,
}

fn normalize(v: &mut Array1<f64>) -> f64 {
    let n = v.dot(v).sqrt();
    if n > 0.0 {
        *v /= n;
    }
    n
}

fn orthogonalize(v: &mut Array1<f64>, found: &[Array1<f64>]) {
    for c in found {
        let p = v.dot(c);
        v.scaled_add(-p, c);
    }
}

/// Leading eigenpair of `Xcᵀ Xc / (N − 1)` orthogonal to `found`.
fn leading(centered: &Array2<f64>, found: &[Array1<f64>]) -> (Array1<f64>, f64) {
    let d = centered.ncols();
    let denom = (centered.nrows() - 1) as f64;
    let cov_times = |v: &Array1<f64>| centered.t().dot(&centered.dot(v)) / denom;
    // start from the highest-variance coordinate left after deflation
    let mut v = Array1::from_iter((0..d).map(|j| 1.0 + 1e-3 * (j as f64 + 1.0).sin()));
    orthogonalize(&mut v, found);
    normalize(&mut v);
    let mut lambda = 0.0;
    for _ in 0..MAX_ITERATIONS {
        let mut w = cov_times(&v);
        orthogonalize(&mut w, found);
        let next_lambda = v.dot(&w);
        if normalize(&mut w) == 0.0 {
            return (v, 0.0);
        }
        let delta = (&w - &v).mapv(f64::abs).sum().min((&w + &v).mapv(f64::abs).sum());
        v = w;
        if delta < TOLERANCE * d as f64 && (next_lambda - lambda).abs() <= TOLERANCE * next_lambda.abs() {
            lambda = next_lambda;
            break;
        }
        lambda = next_lambda;
    }
    // Rayleigh quotient on the converged vector
    let mut w = cov_times(&v);
    orthogonalize(&mut w, found);
    lambda = lambda.max(0.0).max(v.dot(&w));
    (v, lambda)
}

fn fix_sign(v: &mut Array1<f64>) {
    let idx = v.iter().enumerate().fold(0, |best, (i, x)| if x.abs() > v[best].abs() { i } else { best });
    if v[idx] < 0.0 {
        v.mapv_inplace(|x| -x);
    }
}

/// Fits on `matrix` rows (samples × features) and projects each of `others`.
pub fn pca_2d_matrix(matrix: &Array2<f64>, others: &[&Array2<f64>]) -> Result<PcaProjection> {
    if matrix.nrows() < 2 {
        return Err(EvalError::Argument("PCA needs at least two samples".into()));
    }
    if others.iter().any(|o| o.ncols() != matrix.ncols()) {
        return Err(EvalError::Shape("datasets differ in flattened width".into()));
    }
    let mean = matrix.mean_axis(Axis(0)).expect("non-empty");
    let centered = matrix - &mean;
    let total_variance = centered.mapv(|x| x * x).sum() / (matrix.nrows() - 1) as f64;

    let mut found: Vec<Array1<f64>> = Vec::new();
    let mut variances = Vec::new();
    for _ in 0..2 {
        let (mut v, lambda) = leading(&centered, &found);
        if !(lambda > RANK_FLOOR * total_variance) {
            break;
        }
        fix_sign(&mut v);
        found.push(v);
        variances.push(lambda);
    }
    let k = found.len().max(1);
    let rank_deficient = found.len() < 2;
    if found.is_empty() {
        let mut axis = Array1::zeros(matrix.ncols());
        axis[0] = 1.0;
        found.push(axis);
        variances.push(0.0);
    }
    let mut components = Array2::zeros((k, matrix.ncols()));
    for (i, c) in found.iter().enumerate() {
        components.row_mut(i).assign(c);
    }
    let coordinates =
        std::iter::once(matrix).chain(others.iter().copied()).map(|m| (m - &mean).dot(&components.t())).collect();
    Ok(PcaProjection { components, explained_variance: variances, mean, coordinates, rank_deficient })
}

/// Top-two principal components of the flattened real samples, applied to
/// the real dataset and each of `others`.
pub fn pca_2d(real: &TimeSeriesDataset, others: &[&TimeSeriesDataset]) -> Result<PcaProjection> {
    let flat: Vec<Array2<f64>> = others.iter().map(|d| d.flattened()).collect();
    pca_2d_matrix(&real.flattened(), &flat.iter().collect::<Vec<_>>())
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::DMatrix;
    use ndarray::array;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn axis_aligned_data() {
        let x = array![[3.0, 0.0], [-3.0, 0.0], [0.0, -0.5], [0.0, 0.5]];
        let p = pca_2d_matrix(&x, &[]).unwrap();
        assert!((p.components[[0, 0]] - 1.0).abs() < 1e-12 && p.components[[0, 1]].abs() < 1e-12);
        assert!((p.components[[1, 1]].abs() - 1.0).abs() < 1e-12);
        assert!(p.components[[1, 1]] > 0.0);
    }

    #[test]
    fn planar_data_preserves_distances() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let (u, v) = (array![1.0, 2.0, 0.0, -1.0], array![0.0, 1.0, 1.0, 1.0]);
        let rows: Vec<Array1<f64>> = (0..12).map(|_| &u * rng.random_range(-2.0..2.0) + &v * rng.random_range(-1.0..1.0)).collect();
        let mut x = Array2::zeros((12, 4));
        for (i, r) in rows.iter().enumerate() {
            x.row_mut(i).assign(r);
        }
        let p = pca_2d_matrix(&x, &[]).unwrap();
        let c = &p.coordinates[0];
        for i in 0..12 {
            for j in 0..12 {
                let d_orig = (&x.row(i) - &x.row(j)).mapv(|a| a * a).sum().sqrt();
                let d_proj = (&c.row(i) - &c.row(j)).mapv(|a| a * a).sum().sqrt();
                assert!((d_orig - d_proj).abs() < 1e-9, "{d_orig} vs {d_proj}");
            }
        }
    }

    #[test]
    fn matches_dense_eigensolver() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for _ in 0..25 {
            let (n, d) = (rng.random_range(6..20), rng.random_range(3..7));
            let x = Array2::from_shape_simple_fn((n, d), || rng.random::<f64>() * 2.0 - 1.0);
            let p = pca_2d_matrix(&x, &[]).unwrap();
            let mean = x.mean_axis(Axis(0)).unwrap();
            let c = &x - &mean;
            let cov = c.t().dot(&c) / (n - 1) as f64;
            let m = DMatrix::from_fn(d, d, |i, j| cov[[i, j]]);
            let mut eig: Vec<f64> = m.symmetric_eigen().eigenvalues.iter().copied().collect();
            eig.sort_by(|a, b| b.partial_cmp(a).unwrap());
            for k in 0..2 {
                assert!((p.explained_variance[k] - eig[k]).abs() <= 1e-9 * eig[0], "{:?} vs {:?}", p.explained_variance, eig);
            }
        }
    }

    #[test]
    fn rank_one_reports_degenerate() {
        let x = array![[1.0, 2.0], [2.0, 4.0], [3.0, 6.0]];
        let p = pca_2d_matrix(&x, &[]).unwrap();
        assert!(p.rank_deficient);
        assert_eq!(p.coordinates[0].ncols(), 1);
        assert!(pca_2d_matrix(&array![[1.0, 2.0]], &[]).is_err());
    }
}
