//! Subsampled-Gaussian RDP by direct summation in 256-bit floating point:
//! no log-space tricks, exact integer binomials.

use astro_float::{BigFloat, Consts, Radix, RoundingMode};

const P: usize = 256;
const RM: RoundingMode = RoundingMode::ToEven;

pub struct Oracle {
    cc: Consts,
}

fn binomial(n: u32, k: u32) -> u128 {
    let k = k.min(n - k);
    (0..k).fold(1u128, |acc, i| acc * u128::from(n - i) / u128::from(i + 1))
}

fn le(a: &BigFloat, b: &BigFloat) -> bool {
    a.cmp(b).expect("comparable") <= 0
}

fn big(x: f64) -> BigFloat {
    BigFloat::from_f64(x, P)
}

impl Oracle {
    pub fn new() -> Self {
        Self { cc: Consts::new().expect("constants cache") }
    }

    fn to_f64(&mut self, x: &BigFloat) -> f64 {
        x.format(Radix::Dec, RM, &mut self.cc).expect("formats").parse().expect("parses")
    }

    fn exp(&mut self, x: &BigFloat) -> BigFloat {
        x.exp(P, RM, &mut self.cc)
    }

    fn ln(&mut self, x: &BigFloat) -> BigFloat {
        x.ln(P, RM, &mut self.cc)
    }

    /// One-step amplified `ε′(α)` for base `ε(j) = scale · j`, capped by the
    /// base curve.
    pub fn step(&mut self, scale: f64, gamma: f64, alpha: u32) -> BigFloat {
        let s = big(scale);
        let g = big(gamma);
        let eps = |j: u32| s.mul(&BigFloat::from_u32(j, P), P, RM);
        let one = BigFloat::from_u32(1, P);
        let e2 = self.exp(&eps(2));
        let four = BigFloat::from_u32(4, P).mul(&e2.sub(&one, P, RM), P, RM);
        let two = BigFloat::from_u32(2, P).mul(&e2, P, RM);
        let lead = if le(&four, &two) { four } else { two };
        let mut total = one.add(
            &g.powi(2, P, RM).mul(&BigFloat::from_u128(binomial(alpha, 2), P), P, RM).mul(&lead, P, RM),
            P,
            RM,
        );
        for j in 3..=alpha {
            let e = self.exp(&eps(j).mul(&BigFloat::from_u32(j - 1, P), P, RM));
            let term = BigFloat::from_u32(2, P)
                .mul(&g.powi(j as usize, P, RM), P, RM)
                .mul(&BigFloat::from_u128(binomial(alpha, j), P), P, RM)
                .mul(&e, P, RM);
            total = total.add(&term, P, RM);
        }
        let series = self.ln(&total).div(&BigFloat::from_u32(alpha - 1, P), P, RM);
        let base = eps(alpha);
        if le(&series, &base) {
            series
        } else {
            base
        }
    }

    /// `T`-fold composed curve on `orders`, as f64.
    pub fn composed(&mut self, scale: f64, gamma: f64, steps: u64, orders: &[u32]) -> Vec<f64> {
        orders
            .iter()
            .map(|&a| {
                let v = self.step(scale, gamma, a).mul(&BigFloat::from_u64(steps, P), P, RM);
                self.to_f64(&v)
            })
            .collect()
    }

    /// `min_α T·ε′(α) + ln(1/δ)/(α − 1)`.
    pub fn epsilon(&mut self, scale: f64, gamma: f64, steps: u64, delta: f64, orders: &[u32]) -> f64 {
        let ln_inv = self.ln(&big(delta)).neg();
        let mut best: Option<BigFloat> = None;
        for &a in orders {
            let v = self
                .step(scale, gamma, a)
                .mul(&BigFloat::from_u64(steps, P), P, RM)
                .add(&ln_inv.div(&BigFloat::from_u32(a - 1, P), P, RM), P, RM);
            best = Some(match best {
                Some(b) if le(&b, &v) => b,
                _ => v,
            });
        }
        let b = best.expect("non-empty grid");
        self.to_f64(&b)
    }
}
