//! Library behind the `tsfed` binary. Each subcommand is a plain function so
//! test suites can drive the full pipeline without spawning processes.

mod commands;
pub mod config;
mod manifest;

use thiserror::Error;

pub use commands::{
    cmd_account, cmd_audit, cmd_calibrate, cmd_evaluate, cmd_gen_data, cmd_train, evaluate_datasets, load_dataset,
    AccountArgs, CalibrateArgs, EvalOutputs, RunSummary, Synthesis, CONFIG_COPY,
};
pub use config::{Experiment, ExperimentConfig};
pub use manifest::{Manifest, PrivacyRecord, Seeds, TrainingRecord};

#[derive(Debug, Error)]
pub enum CliError {
    #[error("configuration error: {0}")]
    Config(String),
    #[error("numerical divergence: {0}")]
    Divergence(String),
    #[error("infeasible calibration: {0}")]
    Infeasible(String),
    #[error("{0}")]
    Runtime(String),
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
}

impl CliError {
    /// Process exit status for this error.
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 2,
            CliError::Divergence(_) => 3,
            CliError::Infeasible(_) => 4,
            CliError::Runtime(_) | CliError::Io(_) => 1,
        }
    }
}

impl From<tsfed_core::data::DataError> for CliError {
    fn from(e: tsfed_core::data::DataError) -> Self {
        CliError::Config(e.to_string())
    }
}

impl From<tsfed_core::vfl::VflError> for CliError {
    fn from(e: tsfed_core::vfl::VflError) -> Self {
        use tsfed_core::vfl::VflError;
        match e {
            VflError::Config(m) => CliError::Config(m),
            VflError::Divergence { .. } => CliError::Divergence(e.to_string()),
            other => CliError::Runtime(other.to_string()),
        }
    }
}

impl From<tsfed_core::accountant::AccountantError> for CliError {
    fn from(e: tsfed_core::accountant::AccountantError) -> Self {
        use tsfed_core::accountant::AccountantError;
        match e {
            AccountantError::Infeasible(i) => CliError::Infeasible(i.to_string()),
            other => CliError::Config(other.to_string()),
        }
    }
}

impl From<tsfed_core::eval::EvalError> for CliError {
    fn from(e: tsfed_core::eval::EvalError) -> Self {
        CliError::Runtime(e.to_string())
    }
}

impl From<tsfed_core::audit::AuditError> for CliError {
    fn from(e: tsfed_core::audit::AuditError) -> Self {
        use tsfed_core::audit::AuditError;
        match e {
            AuditError::Argument(m) => CliError::Config(m),
            AuditError::Diverged(m) => CliError::Divergence(m),
            AuditError::Vfl(v) => v.into(),
            e @ AuditError::Insufficient { .. } => CliError::Divergence(e.to_string()),
        }
    }
}

pub type Result<T> = std::result::Result<T, CliError>;
