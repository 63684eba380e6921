use serde::{Deserialize, Serialize};

use super::{AccountantError, Result};

/// Integer Rényi orders `2..=64` followed by `80, 96, 128, 256`.
pub fn default_orders() -> Vec<u32> {
    (2..=64).chain([80, 96, 128, 256]).collect()
}

/// Which side of the protocol a Gaussian curve describes.
///
/// Discriminators and feature extractors see the noised gradient once per
/// step (`α / 2σ²`); each generator update draws on two such releases (its
/// local discriminator and its party's feature extractor), giving `α / σ²`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum CurveKind {
    Discriminator,
    #[default]
    Generator,
}

impl CurveKind {
    /// `ε(α) = scale · α` for the Gaussian mechanism at noise multiplier σ.
    pub fn scale(self, sigma: f64) -> f64 {
        match self {
            CurveKind::Discriminator => 1.0 / (2.0 * sigma * sigma),
            CurveKind::Generator => 1.0 / (sigma * sigma),
        }
    }
}

/// `ε(α)` sampled on a strictly increasing integer grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RdpCurve {
    orders: Vec<u32>,
    epsilons: Vec<f64>,
}

impl RdpCurve {
    pub fn new(orders: Vec<u32>, epsilons: Vec<f64>) -> Result<Self> {
        check_orders(&orders)?;
        if orders.len() != epsilons.len() {
            return Err(AccountantError::Argument(format!("{} orders but {} values", orders.len(), epsilons.len())));
        }
        if let Some(bad) = epsilons.iter().find(|e| e.is_nan() || **e < 0.0) {
            return Err(AccountantError::Argument(format!("RDP values must be ≥ 0, got {bad}")));
        }
        Ok(Self { orders, epsilons })
    }

    pub fn orders(&self) -> &[u32] {
        &self.orders
    }

    pub fn epsilons(&self) -> &[f64] {
        &self.epsilons
    }

    pub fn len(&self) -> usize {
        self.orders.len()
    }

    pub fn is_empty(&self) -> bool {
        self.orders.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (u32, f64)> + '_ {
        self.orders.iter().copied().zip(self.epsilons.iter().copied())
    }

    pub fn get(&self, order: u32) -> Option<f64> {
        self.orders.binary_search(&order).ok().map(|i| self.epsilons[i])
    }

    pub fn is_non_decreasing(&self) -> bool {
        self.epsilons.windows(2).all(|w| w[0] <= w[1])
    }
}

pub(super) fn check_orders(orders: &[u32]) -> Result<()> {
    if orders.is_empty() {
        return Err(AccountantError::Argument("empty order grid".into()));
    }
    if orders[0] < 2 {
        return Err(AccountantError::Argument(format!("orders must be ≥ 2, got {}", orders[0])));
    }
    if orders.windows(2).any(|w| w[0] >= w[1]) {
        return Err(AccountantError::Argument("orders must be strictly increasing".into()));
    }
    Ok(())
}

fn check_sigma(sigma: f64) -> Result<()> {
    if sigma.is_finite() && sigma > 0.0 {
        Ok(())
    } else {
        Err(AccountantError::Argument(format!("σ must be finite and > 0, got {sigma}")))
    }
}

pub fn gaussian_rdp(sigma: f64, orders: &[u32], kind: CurveKind) -> Result<RdpCurve> {
    check_sigma(sigma)?;
    let scale = kind.scale(sigma);
    RdpCurve::new(orders.to_vec(), orders.iter().map(|&a| scale * f64::from(a)).collect())
}

/// `ln C(α, j)` for `j = 0..=α`, accumulated term by term.
fn ln_binomials(alpha: u32) -> Vec<f64> {
    let mut out = Vec::with_capacity(alpha as usize + 1);
    let mut acc = 0.0;
    out.push(acc);
    for j in 1..=alpha {
        acc += f64::from(alpha - j + 1).ln() - f64::from(j).ln();
        out.push(acc);
    }
    out
}

fn log_sum_exp(terms: &[f64]) -> f64 {
    let max = terms.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if max == f64::NEG_INFINITY {
        return max;
    }
    max + terms.iter().map(|t| (t - max).exp()).sum::<f64>().ln()
}

/// `ln(1 + e^x)` without overflow.
fn ln_one_plus_exp(x: f64) -> f64 {
    if x > 0.0 {
        x + (-x).exp().ln_1p()
    } else {
        x.exp().ln_1p()
    }
}

/// Amplified order-`α` bound for sampling without replacement at rate `γ`
/// from a base mechanism with `ε(∞) = ∞`:
///
/// `ε′(α) = ln(1 + γ² C(α,2) min{4(e^{ε(2)} − 1), 2e^{ε(2)}}
///              + Σ_{j=3..α} 2 γ^j C(α,j) e^{(j−1)ε(j)}) / (α − 1)`
///
/// Every term is formed in log space.
pub fn amplified_order(base: &dyn Fn(u32) -> f64, gamma: f64, alpha: u32) -> f64 {
    debug_assert!(alpha >= 2);
    let ln_gamma = gamma.ln();
    let ln_binom = ln_binomials(alpha);
    let eps2 = base(2);
    let lead = (4f64.ln() + eps2.exp_m1().ln()).min(2f64.ln() + eps2);
    let mut terms = Vec::with_capacity(alpha as usize);
    terms.push(2.0 * ln_gamma + ln_binom[2] + lead);
    for j in 3..=alpha {
        terms.push(f64::from(j) * ln_gamma + ln_binom[j as usize] + f64::from(j - 1) * base(j) + 2f64.ln());
    }
    ln_one_plus_exp(log_sum_exp(&terms)) / f64::from(alpha - 1)
}

fn check_gamma(gamma: f64) -> Result<()> {
    if gamma > 0.0 && gamma <= 1.0 {
        Ok(())
    } else {
        Err(AccountantError::Argument(format!("sampling rate must lie in (0, 1], got {gamma}")))
    }
}

/// Subsampled Gaussian curve for one step.
///
/// The series can exceed the base curve at large `γ`; since a subsampled
/// mechanism is never less private than the mechanism itself, each order
/// reports `min(series, ε(α))`.
pub fn subsample_amplify(sigma: f64, gamma: f64, orders: &[u32], kind: CurveKind) -> Result<RdpCurve> {
    check_sigma(sigma)?;
    let scale = kind.scale(sigma);
    subsample_amplify_with(&|a| scale * f64::from(a), gamma, orders)
}

/// Subsampled curve for an arbitrary base `ε(j)` with `ε(∞) = ∞`.
pub fn subsample_amplify_with(base: &dyn Fn(u32) -> f64, gamma: f64, orders: &[u32]) -> Result<RdpCurve> {
    check_gamma(gamma)?;
    check_orders(orders)?;
    RdpCurve::new(orders.to_vec(), orders.iter().map(|&a| amplified_order(base, gamma, a).min(base(a))).collect())
}

/// `steps`-fold homogeneous composition.
pub fn compose(curve: &RdpCurve, steps: u64) -> Result<RdpCurve> {
    if steps == 0 {
        return Err(AccountantError::Argument("composition needs at least one step".into()));
    }
    let t = steps as f64;
    RdpCurve::new(curve.orders.clone(), curve.epsilons.iter().map(|e| e * t).collect())
}

/// Sum of curves defined on one shared grid.
pub fn compose_all(curves: &[RdpCurve]) -> Result<RdpCurve> {
    let first = curves.first().ok_or_else(|| AccountantError::Argument("nothing to compose".into()))?;
    let mut eps = vec![0.0; first.len()];
    for c in curves {
        if c.orders != first.orders {
            return Err(AccountantError::Alignment);
        }
        eps.iter_mut().zip(&c.epsilons).for_each(|(acc, e)| *acc += e);
    }
    RdpCurve::new(first.orders.clone(), eps)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DpGuarantee {
    pub epsilon: f64,
    pub delta: f64,
    /// Order attaining the minimum.
    pub order: u32,
}

/// `ε′ = min_α ε(α) + ln(1/δ) / (α − 1)`; ties keep the smallest order.
pub fn to_dp(curve: &RdpCurve, delta: f64) -> Result<DpGuarantee> {
    if !(delta > 0.0 && delta < 1.0) {
        return Err(AccountantError::Argument(format!("δ must lie in (0, 1), got {delta}")));
    }
    if curve.is_empty() {
        return Err(AccountantError::Argument("empty curve".into()));
    }
    let ln_inv = -delta.ln();
    let mut best = DpGuarantee { epsilon: f64::INFINITY, delta, order: curve.orders[0] };
    for (a, e) in curve.iter() {
        let v = e + ln_inv / f64::from(a - 1);
        if v < best.epsilon {
            best = DpGuarantee { epsilon: v, delta, order: a };
        }
    }
    Ok(best)
}
