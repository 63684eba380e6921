mod oracles;

use oracles::rdp::Oracle;
use proptest::prelude::*;
use tsfed_core::accountant::*;

const SIGMAS: [f64; 4] = [0.8, 1.0, 2.0, 4.0];
const GAMMAS: [f64; 3] = [0.005, 0.01, 0.05];
const STEPS: [u64; 3] = [1, 100, 2000];

fn orders() -> Vec<u32> {
    (2..=64).collect()
}

fn library_epsilon(sigma: f64, gamma: f64, steps: u64, delta: f64, kind: CurveKind) -> (RdpCurve, DpGuarantee) {
    let curve = compose(&subsample_amplify(sigma, gamma, &orders(), kind).unwrap(), steps).unwrap();
    let dp = to_dp(&curve, delta).unwrap();
    (curve, dp)
}

#[test]
fn log_space_chain_matches_direct_summation() {
    let mut oracle = Oracle::new();
    for kind in [CurveKind::Generator, CurveKind::Discriminator] {
        for &sigma in &SIGMAS {
            for &gamma in &GAMMAS {
                for &steps in &STEPS {
                    let (curve, dp) = library_epsilon(sigma, gamma, steps, 1e-5, kind);
                    let reference = oracle.composed(kind.scale(sigma), gamma, steps, &orders());
                    for ((a, got), want) in curve.iter().zip(&reference) {
                        assert!((got - want).abs() <= 1e-9 * want, "σ={sigma} γ={gamma} T={steps} α={a}: {got} vs {want}");
                    }
                    let want = oracle.epsilon(kind.scale(sigma), gamma, steps, 1e-5, &orders());
                    assert!((dp.epsilon - want).abs() <= 1e-9 * want, "{} vs {want}", dp.epsilon);
                }
            }
        }
    }
}

#[test]
fn guarantees_are_monotone_on_the_grid() {
    let eps = |s, g, t| library_epsilon(s, g, t, 1e-5, CurveKind::Generator);
    for (i, &sigma) in SIGMAS.iter().enumerate() {
        for (j, &gamma) in GAMMAS.iter().enumerate() {
            for (k, &steps) in STEPS.iter().enumerate() {
                let (curve, dp) = eps(sigma, gamma, steps);
                assert!(curve.is_non_decreasing());
                let mut neighbours = Vec::new();
                if i + 1 < SIGMAS.len() {
                    neighbours.push(eps(SIGMAS[i + 1], gamma, steps));
                }
                for (next_curve, next_dp) in neighbours {
                    assert!(next_dp.epsilon < dp.epsilon);
                    assert!(next_curve.epsilons().iter().zip(curve.epsilons()).all(|(a, b)| a <= b));
                }
                for (next_curve, next_dp) in [
                    (j + 1 < GAMMAS.len()).then(|| eps(sigma, GAMMAS[j + 1], steps)),
                    (k + 1 < STEPS.len()).then(|| eps(sigma, gamma, STEPS[k + 1])),
                ]
                .into_iter()
                .flatten()
                {
                    assert!(next_dp.epsilon > dp.epsilon);
                    assert!(next_curve.epsilons().iter().zip(curve.epsilons()).all(|(a, b)| a >= b));
                }
            }
        }
    }
}

#[test]
fn order_two_value_at_unit_noise() {
    let e = subsample_amplify(1.0, 0.01, &[2], CurveKind::Discriminator).unwrap().epsilons()[0];
    assert!((e - 5.43508e-4).abs() < 1e-9, "{e}");
    let dp = to_dp(&compose(&subsample_amplify(1.0, 0.01, &[2], CurveKind::Discriminator).unwrap(), 1).unwrap(), 1e-5).unwrap();
    assert!((dp.epsilon - (e + 1e5f64.ln())).abs() < 1e-12);
}

#[test]
fn conversion_picks_the_best_order() {
    let curve = RdpCurve::new(vec![2, 3, 4], vec![10.0, 1.0, 5.0]).unwrap();
    let dp = to_dp(&curve, 0.01).unwrap();
    assert_eq!(dp.order, 3);
    assert!((dp.epsilon - (1.0 + 100f64.ln() / 2.0)).abs() < 1e-15);
    assert!(to_dp(&curve, 0.0).is_err());
    assert!(to_dp(&curve, 1.0).is_err());
}

/// Continuous bisection on σ for the same accountant chain, snapped up to
/// the grid at the end.
fn bisection_sigma(epsilon: f64, delta: f64, gamma: f64, steps: u64) -> f64 {
    let eps = |s: f64| to_dp(&compose(&subsample_amplify(s, gamma, &default_orders(), CurveKind::Generator).unwrap(), steps).unwrap(), delta).unwrap().epsilon;
    let (mut lo, mut hi) = (0.05, 50.0);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if eps(mid) > epsilon {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    (hi * 100.0).ceil() / 100.0
}

#[test]
fn calibration_round_trip() {
    let budget = PrivacyBudget::new(10.0, 1e-3).unwrap();
    let c = calibrate(budget, 0.05, 2000, (0.1, 50.0), CurveKind::Generator).unwrap();
    let forward = to_dp(&compose(&subsample_amplify(c.sigma, 0.05, &default_orders(), CurveKind::Generator).unwrap(), 2000).unwrap(), 1e-3).unwrap();
    assert!(forward.epsilon <= 10.0 && forward.epsilon >= 9.5, "{forward:?}");
    assert_eq!(forward, c.achieved);
    assert!((c.sigma - bisection_sigma(10.0, 1e-3, 0.05, 2000)).abs() <= SIGMA_STEP + 1e-12);
}

#[test]
fn calibrating_steps_is_the_inverse() {
    let budget = PrivacyBudget::new(4.0, 1e-5).unwrap();
    let c = calibrate_steps(budget, 0.02, 1.5, (1, 100_000), CurveKind::Generator).unwrap();
    let at = |t| to_dp(&compose(&subsample_amplify(1.5, 0.02, &default_orders(), CurveKind::Generator).unwrap(), t).unwrap(), 1e-5).unwrap().epsilon;
    assert!(at(c.steps) <= 4.0);
    assert!(at(c.steps + 1) > 4.0);
}

#[test]
fn report_orders_the_threat_surfaces() {
    let r = privacy_report(1.2, 0.02, 1000, 1e-5).unwrap();
    assert!(r.generator_external.epsilon < r.generator_internal.epsilon);
    assert!(r.discriminator_external.epsilon < r.generator_external.epsilon);
    assert!(r.discriminator_internal.epsilon < r.generator_internal.epsilon);
}

proptest! {
    #[test]
    fn amplification_never_hurts(sigma in 0.5..8.0f64, gamma in 0.001..1.0f64) {
        let base = gaussian_rdp(sigma, &default_orders(), CurveKind::Generator).unwrap();
        let amp = subsample_amplify(sigma, gamma, &default_orders(), CurveKind::Generator).unwrap();
        for (b, a) in base.epsilons().iter().zip(amp.epsilons()) {
            prop_assert!(a <= b && *a >= 0.0);
        }
    }

    #[test]
    fn composition_adds(sigma in 0.5..8.0f64, gamma in 0.001..0.5f64, t1 in 1u64..500, t2 in 1u64..500) {
        let step = subsample_amplify(sigma, gamma, &default_orders(), CurveKind::Discriminator).unwrap();
        let joint = compose(&step, t1 + t2).unwrap();
        let split = compose_all(&[compose(&step, t1).unwrap(), compose(&step, t2).unwrap()]).unwrap();
        for (a, b) in joint.epsilons().iter().zip(split.epsilons()) {
            prop_assert!((a - b).abs() <= 1e-12 * a.max(1e-300));
        }
    }
}
