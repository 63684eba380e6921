//! Training, privacy accounting and auditing of GANs over vertically
//! partitioned time-series data.
//!
//! The numeric building blocks ([`nn`], [`dp`], the distance metrics in
//! [`eval`]) are generic over [`Scalar`]; the protocol, dataset and audit
//! layers work in `f64` through the aliases below.

pub mod accountant;
pub mod audit;
pub mod data;
pub mod dp;
pub mod eval;
pub mod nn;
pub mod scalar;
pub mod seed;
pub mod vfl;

pub use scalar::Scalar;

/// Double-precision network.
pub type Mlp = nn::MlpModel<f64>;
pub type Gradients = nn::GradientSet<f64>;
pub type Adam = nn::AdamState<f64>;
pub type Trace = nn::ActivationTrace<f64>;
