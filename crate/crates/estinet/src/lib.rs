//! Estimate-and-replace training.
//!
//! Train a neural argument extractor to drive an exact, non-differentiable
//! black-box function by optimizing through a differentiable estimator of
//! that function, then swap the real function back in at inference time.
//!
//! The crate is organized around that loop:
//!
//! - [`autodiff`] — reverse-mode AD engine, losses, Adam.
//! - [`nn`] — the layers extractors and estimators are built from.
//! - [`blackbox`] — the exact functions, their interfaces, and adapters.
//! - [`framework`] — model composition, execution modes, the offline /
//!   online / hybrid training procedures, confidence regularization.
//! - [`tasks`] — deterministic dataset generators and loaders.
//! - [`models`] — the four concrete task models and their baselines.
//! - [`rl`] — the advantage actor-critic comparison agent.
//! - [`experiment`] — configs, run records, result tables, CLI plumbing.
//!
//! See `examples/` for one runnable program per capability, and the
//! `estinet` binary for the `train` / `eval` / `gen-data` / `gradcheck` /
//! `reproduce` commands.

pub mod autodiff;
pub mod blackbox;
pub mod experiment;
pub mod framework;
pub mod models;
pub mod nn;
pub mod rl;
pub mod tasks;
