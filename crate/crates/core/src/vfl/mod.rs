//! Simulated multi-party training of attribute GANs over vertically
//! partitioned time series.
//!
//! Each party holds some attributes of every (aligned) sample and trains one
//! generator and one discriminator per attribute. In the [`Topology::Vfl`]
//! topology each party also runs a feature extractor whose outputs, never
//! the raw attributes, go to a server-side shared discriminator. Every
//! crossing of the party/server boundary is recorded in a [`MessageLog`].

mod bank;
mod config;
mod gradcheck;
mod messages;
mod protocol;
mod state;
mod train;

pub use bank::{GeneratorBank, PartyGenerators, BANK_FORMAT_VERSION};
pub use config::{Architecture, ExtractorKind, ExtractorLoss, GeneratorLoss, Topology, TrainConfig};
pub use gradcheck::{tensor_error, FederationGradReport};
pub use messages::{hash_values, Direction, Message, MessageKind, MessageLog, Phase};
pub use protocol::{DiscriminatorGrads, DiscriminatorLosses, GeneratorGrads, GeneratorLosses, Outgoing};
pub use state::{check_views, FederationState, PartyModels, ServerModels};
pub use train::{train, train_with, CheckpointScorer, History, IterationRecord, TrainOutcome};

use thiserror::Error;

#[derive(Debug, Error)]
pub enum VflError {
    #[error("configuration error: {0}")]
    Config(String),
    #[error("training diverged at iteration {iteration}: {detail}")]
    Divergence { iteration: usize, detail: String },
    #[error("checkpoint error: {0}")]
    Checkpoint(String),
    #[error(transparent)]
    Data(#[from] crate::data::DataError),
    #[error(transparent)]
    Nn(#[from] crate::nn::NnError),
    #[error(transparent)]
    Eval(#[from] crate::eval::EvalError),
}

pub type Result<T> = std::result::Result<T, VflError>;
