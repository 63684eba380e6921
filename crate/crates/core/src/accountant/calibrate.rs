use std::fmt;

use serde::{Deserialize, Serialize};

use super::rdp::{compose, default_orders, gaussian_rdp, subsample_amplify, to_dp, CurveKind, DpGuarantee};
use super::{AccountantError, Result};

/// Resolution of the σ search.
pub const SIGMA_STEP: f64 = 0.01;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PrivacyBudget {
    pub epsilon: f64,
    pub delta: f64,
}

impl PrivacyBudget {
    pub fn new(epsilon: f64, delta: f64) -> Result<Self> {
        if !(epsilon > 0.0 && epsilon.is_finite()) || !(delta > 0.0 && delta < 1.0) {
            return Err(AccountantError::Argument(format!("budget needs ε > 0 and δ ∈ (0, 1), got ({epsilon}, {delta})")));
        }
        Ok(Self { epsilon, delta })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Calibration {
    pub sigma: f64,
    pub steps: u64,
    pub achieved: DpGuarantee,
}

/// Why no grid point satisfied the budget.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Infeasible {
    /// `"sigma_max"` or `"steps_min"`.
    pub binding: String,
    /// Best ε reachable at the binding end of the range.
    pub best_epsilon: f64,
    pub target_epsilon: f64,
}

impl fmt::Display for Infeasible {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "budget ε={} unreachable: best ε={} at the {} limit",
            self.target_epsilon, self.best_epsilon, self.binding
        )
    }
}

/// External-adversary guarantee after `steps` subsampled iterations.
fn external(sigma: f64, gamma: f64, steps: u64, delta: f64, kind: CurveKind) -> Result<DpGuarantee> {
    let step = subsample_amplify(sigma, gamma, &default_orders(), kind)?;
    to_dp(&compose(&step, steps)?, delta)
}

/// Smallest σ on the `SIGMA_STEP` grid within `sigma_range` meeting the
/// budget after `steps` iterations at sampling rate `gamma`.
///
/// The achieved ε is non-increasing in σ, so the grid is bisected.
pub fn calibrate(budget: PrivacyBudget, gamma: f64, steps: u64, sigma_range: (f64, f64), kind: CurveKind) -> Result<Calibration> {
    let (lo, hi) = sigma_range;
    if !(lo > 0.0 && lo <= hi && hi.is_finite()) {
        return Err(AccountantError::Argument(format!("σ range must satisfy 0 < lo ≤ hi, got ({lo}, {hi})")));
    }
    let mut k_lo = (lo / SIGMA_STEP - 1e-9).ceil() as u64;
    let k_hi = (hi / SIGMA_STEP + 1e-9).floor() as u64;
    if k_lo == 0 {
        k_lo = 1;
    }
    if k_lo > k_hi {
        return Err(AccountantError::Argument(format!("σ range ({lo}, {hi}) contains no grid point")));
    }
    let sigma_at = |k: u64| k as f64 / 100.0;
    let eval = |k: u64| external(sigma_at(k), gamma, steps, budget.delta, kind);

    let top = eval(k_hi)?;
    if top.epsilon > budget.epsilon {
        return Err(AccountantError::Infeasible(Infeasible {
            binding: "sigma_max".into(),
            best_epsilon: top.epsilon,
            target_epsilon: budget.epsilon,
        }));
    }
    let bottom = eval(k_lo)?;
    if bottom.epsilon <= budget.epsilon {
        return Ok(Calibration { sigma: sigma_at(k_lo), steps, achieved: bottom });
    }
    // invariant: eval(a) > target, eval(b) ≤ target
    let (mut a, mut b, mut best) = (k_lo, k_hi, top);
    while b - a > 1 {
        let mid = a + (b - a) / 2;
        let g = eval(mid)?;
        if g.epsilon <= budget.epsilon {
            b = mid;
            best = g;
        } else {
            a = mid;
        }
    }
    Ok(Calibration { sigma: sigma_at(b), steps, achieved: best })
}

/// Largest iteration count in `steps_range` meeting the budget at a fixed σ.
pub fn calibrate_steps(budget: PrivacyBudget, gamma: f64, sigma: f64, steps_range: (u64, u64), kind: CurveKind) -> Result<Calibration> {
    let (lo, hi) = steps_range;
    if lo == 0 || lo > hi {
        return Err(AccountantError::Argument(format!("steps range must satisfy 1 ≤ lo ≤ hi, got ({lo}, {hi})")));
    }
    let eval = |t: u64| external(sigma, gamma, t, budget.delta, kind);
    let first = eval(lo)?;
    if first.epsilon > budget.epsilon {
        return Err(AccountantError::Infeasible(Infeasible {
            binding: "steps_min".into(),
            best_epsilon: first.epsilon,
            target_epsilon: budget.epsilon,
        }));
    }
    let last = eval(hi)?;
    if last.epsilon <= budget.epsilon {
        return Ok(Calibration { sigma, steps: hi, achieved: last });
    }
    let (mut a, mut b, mut best) = (lo, hi, first);
    while b - a > 1 {
        let mid = a + (b - a) / 2;
        let g = eval(mid)?;
        if g.epsilon <= budget.epsilon {
            a = mid;
            best = g;
        } else {
            b = mid;
        }
    }
    Ok(Calibration { sigma, steps: a, achieved: best })
}

/// Both threat surfaces for both curves of a training run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PrivacyReport {
    pub sigma: f64,
    pub sampling_rate: f64,
    pub steps: u64,
    pub delta: f64,
    /// Subsampled, as seen by an adversary who only sees the release.
    pub generator_external: DpGuarantee,
    pub discriminator_external: DpGuarantee,
    /// Unamplified: a participating party knows the batch indices.
    pub generator_internal: DpGuarantee,
    pub discriminator_internal: DpGuarantee,
}

pub fn privacy_report(sigma: f64, gamma: f64, steps: u64, delta: f64) -> Result<PrivacyReport> {
    let internal = |kind| to_dp(&compose(&gaussian_rdp(sigma, &default_orders(), kind)?, steps)?, delta);
    Ok(PrivacyReport {
        sigma,
        sampling_rate: gamma,
        steps,
        delta,
        generator_external: external(sigma, gamma, steps, delta, CurveKind::Generator)?,
        discriminator_external: external(sigma, gamma, steps, delta, CurveKind::Discriminator)?,
        generator_internal: internal(CurveKind::Generator)?,
        discriminator_internal: internal(CurveKind::Discriminator)?,
    })
}
