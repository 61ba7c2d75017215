//! Reproducible experiment driver: configs, seeds, run records, result
//! tables, and the gradient-check gate.

pub mod config;
pub mod gen_data;
pub mod presets;
pub mod reproduce;
pub mod runner;

pub use config::{DatasetParams, EvalPlan, ExperimentConfig, ModelChoice, TaskId, TllDims};
pub use gen_data::{audit, generate, GenTask};
pub use presets::Scale;
pub use reproduce::{reproduce, table_schema};
pub use runner::{resolve_corpus, run_experiment, run_single, write_records, RunRecord, DATA_DIR_ENV};

use crate::autodiff::gradcheck::{op_cases, run_suite, Report};
use crate::framework::EstiNetError;
use crate::nn::layer_cases;

/// The full finite-difference suite: every primitive op and every layer.
/// `fault` flips the analytic gradient sign of the named case, proving the
/// suite catches an injected error.
pub fn gradcheck_suite(trials: usize, seed: u64, fault: Option<&str>) -> Result<Report, EstiNetError> {
    let mut cases = op_cases();
    cases.extend(layer_cases());
    Ok(run_suite(&cases, trials, seed, fault)?)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn full_gradcheck_passes_and_mutation_is_named() {
        let report = gradcheck_suite(1, 3, None).unwrap();
        assert!(report.passed(), "failures: {:?}", report.failures());
        let broken = gradcheck_suite(1, 3, Some("conv2d")).unwrap();
        let failures = broken.failures();
        assert_eq!(failures.len(), 1);
        assert_eq!(failures[0].name, "conv2d");
    }
}
