//! Rényi-DP accounting for the subsampled Gaussian mechanism: base curves,
//! amplification by subsampling, composition, conversion to `(ε, δ)` and
//! inverse calibration of the noise multiplier.

mod calibrate;
mod rdp;

pub use calibrate::{calibrate, calibrate_steps, privacy_report, Calibration, Infeasible, PrivacyBudget, PrivacyReport, SIGMA_STEP};
pub use rdp::{
    amplified_order, compose, compose_all, default_orders, gaussian_rdp, subsample_amplify, subsample_amplify_with, to_dp,
    CurveKind, DpGuarantee, RdpCurve,
};

use thiserror::Error;

#[derive(Debug, Error)]
pub enum AccountantError {
    #[error("invalid argument: {0}")]
    Argument(String),
    #[error("curves are defined on different order grids")]
    Alignment,
    #[error("{0}")]
    Infeasible(Infeasible),
}

pub type Result<T> = std::result::Result<T, AccountantError>;
