//! Model composition, execution modes, the target and black-box losses, and
//! the offline / online / hybrid training procedures.

pub mod checkpoint;
pub mod config;
pub mod dataset;
pub mod task;
pub mod training;

pub use checkpoint::{load_checkpoint, save_checkpoint, Checkpoint};
pub use config::{EntropyReg, PretrainConfig, Procedure, TrainingConfig};
pub use dataset::{BbEntry, BlackBoxDataset, Provenance};
pub use task::{EstiNetTask, ModelParams};
pub use training::{
    evaluate, sample_online, train_procedure, EvalReport, Phase, PretrainReport, RunMetrics,
    StepRecord, TrainOutcome,
};

use thiserror::Error;

/// Forward-pass interpretation of the composed model.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub enum Mode {
    /// Estimator in the loop, losses computed.
    Train,
    /// Estimator in the loop, evaluation only.
    Test,
    /// Arguments hardened, the real black box computes the output.
    Inference,
}

#[derive(Debug, Error)]
pub enum EstiNetError {
    #[error(transparent)]
    Autodiff(#[from] crate::autodiff::AdError),
    #[error(transparent)]
    BlackBox(#[from] crate::blackbox::BbError),
    #[error(transparent)]
    Data(#[from] crate::tasks::DataError),
    #[error("training diverged at step {step}: {what} = {value}")]
    Divergence { step: usize, what: String, value: f64 },
    #[error("configuration error: {0}")]
    Config(String),
    #[error("checkpoint error: {0}")]
    Checkpoint(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}
