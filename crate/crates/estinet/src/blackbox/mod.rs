//! Exact, non-differentiable functions and the adapters bridging network
//! outputs to their interfaces. Everything here is pure and callable from
//! any thread.

pub mod functions;
pub mod interface;
pub mod lookup;

pub use functions::{
    bb_compare, bb_sum, bb_table_logic, CompareOp, TableOp, DIGIT_CLASSES, TABLE_OPS,
};
pub use interface::{
    adapt_hard, record_bb_pair, Adapter, AdapterDirection, AdapterRule, ArgDomain, ArgValue,
    BlackBoxFunction, OutputDomain, OutputValue,
};
pub use lookup::LookupTable;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum BbError {
    #[error("domain violation: {0}")]
    Domain(String),
    #[error("arity mismatch: expected {expected}, got {got}")]
    Arity { expected: usize, got: usize },
    #[error("parse error: {0}")]
    Parse(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}
