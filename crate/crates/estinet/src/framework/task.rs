use rand_chacha::ChaCha8Rng;

use crate::autodiff::graph::{Graph, Var};
use crate::autodiff::params::{Bound, ParamSet};
use crate::blackbox::{ArgValue, BbError, BlackBoxFunction, OutputValue};

use super::dataset::{BbEntry, BlackBoxDataset};
use super::EstiNetError;

/// The two disjoint parameter sets of a composed model. Nothing is ever
/// registered in both; the training procedures rely on that partition.
#[derive(Debug, Clone)]
pub struct ModelParams {
    pub extractor: ParamSet<f32>,
    pub estimator: ParamSet<f32>,
}

impl ModelParams {
    pub fn new() -> Self {
        ModelParams { extractor: ParamSet::new(), estimator: ParamSet::new() }
    }
}

impl Default for ModelParams {
    fn default() -> Self {
        Self::new()
    }
}

/// Contract between one task's composed model and the shared training
/// procedures. The forward pass runs extractor and estimator on soft
/// argument distributions; hardening happens only on the path to the real
/// black box.
pub trait EstiNetTask {
    type Sample: Clone + Send + Sync;
    /// Whatever the forward pass needs to remember for losses, hardening,
    /// and metrics.
    type Fwd;

    fn name(&self) -> &'static str;
    fn blackbox(&self) -> &BlackBoxFunction;
    /// Regression tasks use squared-error losses and report MAE.
    fn is_regression(&self) -> bool {
        false
    }

    /// Differentiable forward through extractor and estimator. Train and
    /// test modes share this path; training passes an RNG so selector-style
    /// extractors can draw Gumbel-softmax samples (temperature 1) instead of
    /// deterministic softmax selections, evaluation passes `None` for the
    /// noiseless limit.
    fn forward(
        &self,
        g: &mut Graph<f32>,
        arg_bound: &Bound,
        est_bound: &Bound,
        batch: &[Self::Sample],
        selection_noise: Option<&mut ChaCha8Rng>,
    ) -> Result<Self::Fwd, EstiNetError>;

    /// The model output tensor (logits `[batch, classes]` or regression
    /// column `[batch]`).
    fn prediction(&self, fwd: &Self::Fwd) -> Var;

    /// Per-sample summed entropy of the extractor's argument distributions,
    /// `[batch]`-shaped; feeds the confidence regularizer.
    fn arg_entropy_rows(&self, fwd: &Self::Fwd) -> Var;

    /// Task loss against gold labels.
    fn target_loss(
        &self,
        g: &mut Graph<f32>,
        fwd: &Self::Fwd,
        batch: &[Self::Sample],
        label_smoothing: f64,
    ) -> Result<Var, EstiNetError>;

    /// Argmax-harden each sample's argument distributions into black-box
    /// arguments. A sample whose selection cannot be adapted (e.g. a text
    /// selector picking a word where a number is required) yields the error.
    fn harden_args(
        &self,
        g: &Graph<f32>,
        fwd: &Self::Fwd,
        batch: &[Self::Sample],
    ) -> Vec<Result<Vec<ArgValue>, BbError>>;

    /// Hardening for online queries during training: categorical sampling
    /// (Gumbel-max at temperature 1) instead of argmax, so queries explore
    /// the whole argument space the extractor currently entertains. Defaults
    /// to the deterministic adapter.
    fn sample_args(
        &self,
        g: &Graph<f32>,
        fwd: &Self::Fwd,
        batch: &[Self::Sample],
        _rng: &mut ChaCha8Rng,
    ) -> Vec<Result<Vec<ArgValue>, BbError>> {
        self.harden_args(g, fwd, batch)
    }

    /// Network inputs that produced each sample's arguments (stored with
    /// online entries so the estimator can be evaluated on them later), or
    /// `None` when the inputs are derivable from the arguments.
    fn soft_inputs(&self, g: &Graph<f32>, fwd: &Self::Fwd) -> Vec<Option<Vec<Vec<f32>>>>;

    /// When true, the black-box loss trains the estimator directly on the
    /// recorded dataset entries (hardened arguments, exact labels) via
    /// [`Self::estimator_forward`]; otherwise it compares the forward pass's
    /// soft-path prediction against the labels via [`Self::blackbox_loss`].
    /// Tasks whose extractor output is itself a distribution (the image
    /// tasks) use the soft path; selector tasks use entries.
    fn blackbox_loss_on_entries(&self) -> bool {
        false
    }

    /// Black-box loss on the forwarded batch given per-sample labels
    /// (`None` marks skipped queries). `Ok(None)` when no row is usable.
    fn blackbox_loss(
        &self,
        g: &mut Graph<f32>,
        fwd: &Self::Fwd,
        labels: &[Option<OutputValue>],
        label_smoothing: f64,
    ) -> Result<Option<Var>, EstiNetError>;

    /// Draw `n` entries from the a-priori input distribution and label them
    /// through the black box.
    fn sample_offline(&self, n: usize, rng: &mut ChaCha8Rng)
        -> Result<BlackBoxDataset, EstiNetError>;

    /// Estimator-only forward over dataset entries (offline pretraining and
    /// estimator evaluation).
    fn estimator_forward(
        &self,
        g: &mut Graph<f32>,
        est_bound: &Bound,
        entries: &[BbEntry],
    ) -> Result<Var, EstiNetError>;

    /// Pretraining loss for [`Self::estimator_forward`] output.
    fn estimator_loss(
        &self,
        g: &mut Graph<f32>,
        out: Var,
        entries: &[BbEntry],
        label_smoothing: f64,
    ) -> Result<Var, EstiNetError>;

    /// Whether one estimator output row counts as correct for its entry.
    fn estimator_output_matches(&self, row: &[f32], entry: &BbEntry) -> bool;

    /// Width of one estimator output row (to chunk the forward output).
    fn estimator_row_width(&self) -> usize;

    /// Inference mode: extractor forward, hardening adapters, the real black
    /// box, and the label adapter. The estimator's parameters are not an
    /// input, so this mode cannot read them.
    fn infer(
        &self,
        g: &mut Graph<f32>,
        arg_bound: &Bound,
        sample: &Self::Sample,
    ) -> Result<OutputValue, EstiNetError>;

    /// Test/train-mode correctness of one prediction row.
    fn prediction_matches(&self, row: &[f32], sample: &Self::Sample) -> bool;

    /// Absolute error of one prediction row (classification: 0/1 mismatch).
    fn prediction_error(&self, row: &[f32], sample: &Self::Sample) -> f64;

    /// Inference-mode correctness of a black-box output.
    fn output_matches(&self, out: &OutputValue, sample: &Self::Sample) -> bool;

    fn output_error(&self, out: &OutputValue, sample: &Self::Sample) -> f64;

    /// Error charged when inference cannot even query the black box.
    fn violation_error(&self, _sample: &Self::Sample) -> f64 {
        1.0
    }

    /// Extractor argument accuracy against hidden gold structure, as
    /// (correct, total); `None` when gold arguments are unavailable.
    fn argument_accuracy(
        &self,
        g: &Graph<f32>,
        fwd: &Self::Fwd,
        batch: &[Self::Sample],
    ) -> Option<(usize, usize)>;

    /// Mean entropy of the estimator's output distribution, when it is one.
    fn prediction_entropy(&self, g: &Graph<f32>, fwd: &Self::Fwd) -> Option<f64>;
}
