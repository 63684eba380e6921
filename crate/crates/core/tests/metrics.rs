mod oracles;

use ndarray::Array3;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use tsfed_core::data::{gen_sine2, TimeSeriesDataset};
use tsfed_core::eval::{awd, tpd_from_scores, wd_1d};

fn points(rng: &mut ChaCha8Rng, max: usize) -> Vec<f64> {
    let n = rng.random_range(1..=max);
    // A coarse lattice makes ties common.
    (0..n).map(|_| if rng.random_bool(0.3) { rng.random_range(-3..=3) as f64 * 0.5 } else { rng.random_range(-3.0..3.0) }).collect()
}

#[test]
fn matches_exact_transport() {
    let mut rng = ChaCha8Rng::seed_from_u64(77);
    for _ in 0..1000 {
        let (u, v) = (points(&mut rng, 8), points(&mut rng, 8));
        let got = wd_1d(&u, &v).unwrap();
        let want = oracles::transport::w1(&u, &v);
        assert!((got - want).abs() <= 1e-12, "{u:?} {v:?}: {got} vs {want}");
    }
}

#[test]
fn metric_axioms_on_random_triples() {
    let mut rng = ChaCha8Rng::seed_from_u64(78);
    for _ in 0..500 {
        let (a, b, c) = (points(&mut rng, 10), points(&mut rng, 10), points(&mut rng, 10));
        let d = |x: &[f64], y: &[f64]| wd_1d(x, y).unwrap();
        assert!(d(&a, &b) >= 0.0);
        assert_eq!(d(&a, &a), 0.0);
        assert!((d(&a, &b) - d(&b, &a)).abs() <= 1e-15);
        assert!(d(&a, &c) <= d(&a, &b) + d(&b, &c) + 1e-12);
        let shift = rng.random_range(-5.0..5.0);
        let (sa, sb): (Vec<f64>, Vec<f64>) = (a.iter().map(|x| x + shift).collect(), b.iter().map(|x| x + shift).collect());
        assert!((d(&sa, &sb) - d(&a, &b)).abs() <= 1e-12);
        let scale = rng.random_range(-4.0..4.0);
        let (ka, kb): (Vec<f64>, Vec<f64>) = (a.iter().map(|x| x * scale).collect(), b.iter().map(|x| x * scale).collect());
        assert!((d(&ka, &kb) - scale.abs() * d(&a, &b)).abs() <= 1e-12);
    }
}

#[test]
fn rejects_empty_and_non_finite_samples() {
    assert!(wd_1d::<f64>(&[], &[1.0]).is_err());
    assert!(wd_1d(&[f64::NAN], &[1.0]).is_err());
}

#[test]
fn table_tpd_follows_absolute_differences() {
    let v = tpd_from_scores(0.050, 0.048, 0.050, 0.050);
    assert!((v - 0.002).abs() < 1e-15, "{v}");
    assert_eq!(format!("{v:.3}"), "0.002");
    // A row with gaps of both signs separates the conventions.
    let c = tpd_from_scores(0.050, 0.048, 0.057, 0.056);
    assert_eq!(format!("{c:.3}"), "0.015");
}

#[test]
fn awd_of_a_dataset_with_itself_is_zero() {
    let ds = gen_sine2(16, 10, 3, None).unwrap();
    assert_eq!(awd(&ds, &ds).unwrap().value, 0.0);
    let shifted = TimeSeriesDataset::new(ds.data() + 0.25, None).unwrap();
    let r = awd(&ds, &shifted).unwrap();
    assert!((r.value - 0.25).abs() < 1e-12);
    assert_eq!(r.cells.dim(), (2, 10));
    let other = TimeSeriesDataset::new(Array3::zeros((3, 2, 9)), None).unwrap();
    assert!(awd(&ds, &other).is_err());
}
