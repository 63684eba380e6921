//! Floating-point scalar abstraction shared by the numeric modules.

use std::fmt::{Debug, Display};
use std::iter::Sum;
use std::ops::{AddAssign, DivAssign, MulAssign, SubAssign};

use ndarray::{LinalgScalar, ScalarOperand};
use num_traits::{Float, FromPrimitive, ToPrimitive};

/// Real scalar usable by the network engine and the metric code.
///
/// Implemented for `f32` and `f64`. The training stack and every tolerance in
/// the test-suite assume `f64`.
pub trait Scalar:
    Float
    + FromPrimitive
    + ToPrimitive
    + LinalgScalar
    + ScalarOperand
    + AddAssign
    + SubAssign
    + MulAssign
    + DivAssign
    + Sum
    + Debug
    + Display
    + Default
    + Send
    + Sync
    + 'static
{
    /// Short tag written into checkpoints.
    const TAG: &'static str;

    /// Lossless for `f64`, rounding for `f32`.
    fn from_f64_lossy(v: f64) -> Self {
        Self::from_f64(v).expect("finite f64 converts to any float type")
    }

    fn as_f64(self) -> f64 {
        self.to_f64().expect("float converts to f64")
    }
}

impl Scalar for f32 {
    const TAG: &'static str = "f32";
}

impl Scalar for f64 {
    const TAG: &'static str = "f64";
}

#[cfg(test)]
mod tests {
    use super::*;

    fn roundtrip<T: Scalar>(v: f64) -> f64 {
        T::from_f64_lossy(v).as_f64()
    }

    #[test]
    fn f64_conversion_is_exact() {
        let v = 0.1_f64 + 0.2;
        assert_eq!(roundtrip::<f64>(v).to_bits(), v.to_bits());
    }

    #[test]
    fn f32_conversion_rounds() {
        assert_eq!(roundtrip::<f32>(0.5), 0.5);
        assert!((roundtrip::<f32>(0.1) - 0.1).abs() < 1e-8);
    }
}
