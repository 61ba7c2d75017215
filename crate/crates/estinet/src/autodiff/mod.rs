//! Reverse-mode automatic differentiation over dense tensors, plus the loss
//! and optimizer primitives shared by every experiment.

pub mod adam;
pub mod gradcheck;
pub mod graph;
pub mod loss;
pub mod params;
pub mod scalar;
pub mod tensor;

pub use adam::AdamState;
pub use graph::{Graph, Var};
pub use params::{Bound, ParamSet};
pub use scalar::Scalar;
pub use tensor::Tensor;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum AdError {
    #[error("shape mismatch: {0}")]
    BadShape(String),
    #[error("loss must be a scalar, got {0} elements")]
    NonScalarLoss(usize),
    #[error("log of non-positive value {0}")]
    LogDomain(f64),
    #[error("division by zero")]
    DivByZero,
    #[error("target row {row} sums to {sum}, expected 1")]
    NotNormalized { row: usize, sum: f64 },
    #[error("negative probability {0}")]
    NegativeProbability(f64),
    #[error("non-finite values in {0}")]
    NonFinite(String),
    #[error("{0}")]
    Invalid(String),
}
