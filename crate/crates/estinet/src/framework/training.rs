//! The offline, online, and hybrid training procedures, plus evaluation in
//! the three execution modes.
//!
//! Parameter partition: the target-side loss (task loss plus confidence
//! regularizer) updates only the extractor; the black-box loss updates only
//! the estimator. The end-to-end baseline collapses that into one loss
//! applied to everything and never queries the black box.

use rand::seq::SliceRandom;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::autodiff::adam::AdamState;
use crate::autodiff::graph::{Graph, Var};
use crate::autodiff::AdError;

use super::config::{EntropyReg, Procedure, TrainingConfig};
use super::dataset::{BbEntry, BlackBoxDataset, Provenance};
use super::task::{EstiNetTask, ModelParams};
use super::{EstiNetError, Mode};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Phase {
    Pretrain,
    Joint,
}

#[derive(Debug, Clone)]
pub struct StepRecord {
    pub step: usize,
    pub phase: Phase,
    pub target_loss: f64,
    pub blackbox_loss: Option<f64>,
    pub entropy_term: f64,
    pub extractor_grad_norm: f64,
    pub estimator_grad_norm: f64,
    pub estimator_output_entropy: Option<f64>,
    pub skipped_queries: usize,
}

#[derive(Debug, Clone)]
pub struct PretrainReport {
    pub epochs_run: usize,
    pub exit_accuracy: f64,
    pub plateaued: bool,
}

#[derive(Debug, Clone, Default)]
pub struct RunMetrics {
    pub steps: Vec<StepRecord>,
}

impl RunMetrics {
    pub fn joint_steps(&self) -> impl Iterator<Item = &StepRecord> {
        self.steps.iter().filter(|s| s.phase == Phase::Joint)
    }
}

pub struct TrainOutcome {
    pub metrics: RunMetrics,
    pub pretrain: Option<PretrainReport>,
    /// Entries recorded from online sampling during training (capped).
    pub online_entries: BlackBoxDataset,
}

/// Evaluation counters for one dataset in one mode.
#[derive(Debug, Clone, Default)]
pub struct EvalReport {
    pub n: usize,
    pub correct: usize,
    pub absolute_error_sum: f64,
    pub argument_correct: usize,
    pub argument_total: usize,
    /// Inference-mode black-box domain violations (counted as incorrect).
    pub domain_violations: usize,
}

impl EvalReport {
    pub fn accuracy(&self) -> f64 {
        if self.n == 0 {
            0.0
        } else {
            self.correct as f64 / self.n as f64
        }
    }

    pub fn mae(&self) -> f64 {
        if self.n == 0 {
            0.0
        } else {
            self.absolute_error_sum / self.n as f64
        }
    }

    pub fn argument_accuracy(&self) -> Option<f64> {
        (self.argument_total > 0).then(|| self.argument_correct as f64 / self.argument_total as f64)
    }
}

const ONLINE_CAP: usize = 4000;

fn entropy_term(
    g: &mut Graph<f32>,
    rows: Var,
    reg: EntropyReg,
) -> Result<Var, AdError> {
    match reg {
        EntropyReg::Off => Ok(g.scalar(0.0)),
        EntropyReg::Threshold { lambda, gamma } => {
            if lambda == 0.0 {
                return Ok(g.scalar(0.0));
            }
            let over = g.add_scalar(rows, -(gamma as f32));
            let clipped = g.relu(over);
            let mean = g.mean(clipped);
            Ok(g.mul_scalar(mean, lambda as f32))
        }
        EntropyReg::Negative { weight } => {
            let mean = g.mean(rows);
            let neg = g.neg(mean);
            Ok(g.mul_scalar(neg, weight as f32))
        }
    }
}

/// Query the black box once per batch item using the hardened arguments of
/// the current forward pass; domain violations are skipped and counted.
fn collect_online_labels<T: EstiNetTask>(
    task: &T,
    g: &Graph<f32>,
    fwd: &T::Fwd,
    batch: &[T::Sample],
    online: &mut BlackBoxDataset,
    rng: &mut ChaCha8Rng,
) -> Vec<Option<crate::blackbox::OutputValue>> {
    let hardened = task.sample_args(g, fwd, batch, rng);
    let mut softs = task.soft_inputs(g, fwd);
    let bbf = task.blackbox();
    hardened
        .into_iter()
        .enumerate()
        .map(|(i, h)| match h.and_then(|args| {
            let label = bbf.call(&args)?;
            Ok((args, label))
        }) {
            Ok((args, label)) => {
                online.entries.push(BbEntry {
                    args,
                    label: label.clone(),
                    soft_inputs: softs[i].take(),
                    provenance: Provenance::Online,
                });
                Some(label)
            }
            Err(_) => {
                online.skipped += 1;
                None
            }
        })
        .collect()
}

/// One standalone round of online sampling (the trainer does the same thing
/// inline each step).
pub fn sample_online<T: EstiNetTask>(
    task: &T,
    params: &ModelParams,
    batch: &[T::Sample],
) -> Result<BlackBoxDataset, EstiNetError> {
    let mut g = Graph::new();
    let arg_bound = params.extractor.bind(&mut g);
    let est_bound = params.estimator.bind(&mut g);
    let fwd = task.forward(&mut g, &arg_bound, &est_bound, batch, None)?;
    let mut ds = BlackBoxDataset::default();
    let mut rng = ChaCha8Rng::seed_from_u64(0x5a17);
    collect_online_labels(task, &g, &fwd, batch, &mut ds, &mut rng);
    Ok(ds)
}

/// Estimator accuracy over dataset entries (argmax versus recorded label,
/// per the task's own notion of a match).
pub fn estimator_accuracy<T: EstiNetTask>(
    task: &T,
    params: &ModelParams,
    entries: &[BbEntry],
) -> Result<f64, EstiNetError> {
    if entries.is_empty() {
        return Ok(0.0);
    }
    let width = task.estimator_row_width();
    let mut correct = 0usize;
    for chunk in entries.chunks(200) {
        let mut g = Graph::new();
        let est_bound = params.estimator.bind(&mut g);
        let out = task.estimator_forward(&mut g, &est_bound, chunk)?;
        let values = g.values(out);
        for (row, entry) in values.chunks(width).zip(chunk) {
            if task.estimator_output_matches(row, entry) {
                correct += 1;
            }
        }
    }
    Ok(correct as f64 / entries.len() as f64)
}

/// Phase 1 of the offline and hybrid procedures: train the estimator alone
/// on a-priori samples until the stop rule fires.
fn pretrain_estimator<T: EstiNetTask>(
    task: &T,
    params: &mut ModelParams,
    cfg: &TrainingConfig,
    metrics: &mut RunMetrics,
    step: &mut usize,
) -> Result<PretrainReport, EstiNetError> {
    let pre = &cfg.pretrain;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed.wrapping_add(0x0ff1e));
    let holdout = task.sample_offline(pre.holdout, &mut rng)?;
    let mut adam = AdamState::new(&params.estimator, cfg.learning_rate);
    let mut best = f64::MIN;
    let mut since_best = 0usize;
    let mut last = 0.0;
    for epoch in 0..pre.max_epochs {
        let ds = task.sample_offline(pre.samples_per_epoch, &mut rng)?;
        for chunk in ds.entries.chunks(pre.batch_size) {
            let mut g = Graph::new();
            let est_bound = params.estimator.bind(&mut g);
            let out = task.estimator_forward(&mut g, &est_bound, chunk)?;
            let loss = task.estimator_loss(&mut g, out, chunk, cfg.label_smoothing)?;
            let lv = g.values(loss)[0] as f64;
            if !lv.is_finite() {
                return Err(EstiNetError::Divergence {
                    step: *step,
                    what: format!("{} pretrain loss (epoch {epoch})", task.name()),
                    value: lv,
                });
            }
            g.backward(loss)?;
            let norm = params.estimator.take_grads(&g, &est_bound);
            adam.step(&mut params.estimator)?;
            metrics.steps.push(StepRecord {
                step: *step,
                phase: Phase::Pretrain,
                target_loss: lv,
                blackbox_loss: None,
                entropy_term: 0.0,
                extractor_grad_norm: 0.0,
                estimator_grad_norm: norm,
                estimator_output_entropy: None,
                skipped_queries: 0,
            });
            *step += 1;
        }
        last = estimator_accuracy(task, params, &holdout.entries)?;
        if last >= pre.target_accuracy {
            return Ok(PretrainReport {
                epochs_run: epoch + 1,
                exit_accuracy: last,
                plateaued: false,
            });
        }
        if last > best + 1e-9 {
            best = last;
            since_best = 0;
        } else {
            since_best += 1;
            if since_best >= pre.patience {
                return Ok(PretrainReport {
                    epochs_run: epoch + 1,
                    exit_accuracy: last,
                    plateaued: true,
                });
            }
        }
    }
    Ok(PretrainReport {
        epochs_run: pre.max_epochs,
        exit_accuracy: last,
        plateaued: true,
    })
}

/// Run the configured procedure over the training set. The hook fires after
/// every joint-phase optimizer step with the current parameters (learning
/// curves hang off it).
pub fn train_procedure<T: EstiNetTask>(
    task: &T,
    params: &mut ModelParams,
    train: &[T::Sample],
    cfg: &TrainingConfig,
    mut hook: impl FnMut(usize, &ModelParams) -> Result<(), EstiNetError>,
) -> Result<TrainOutcome, EstiNetError> {
    cfg.validate()?;
    if train.is_empty() {
        return Err(EstiNetError::Config("empty training set".into()));
    }
    let mut metrics = RunMetrics::default();
    let mut step = 0usize;
    let mut pretrain = None;

    params.estimator.set_frozen(false);
    match cfg.procedure {
        Procedure::Offline | Procedure::Hybrid => {
            if cfg.pretrain.max_epochs > 0 {
                pretrain = Some(pretrain_estimator(task, params, cfg, &mut metrics, &mut step)?);
            }
            if cfg.procedure == Procedure::Offline {
                params.estimator.set_frozen(true);
            }
        }
        Procedure::Online | Procedure::EndToEnd => {}
    }
    let use_blackbox = matches!(
        cfg.procedure,
        Procedure::Online | Procedure::Hybrid
    );
    let end_to_end = cfg.procedure == Procedure::EndToEnd;

    let mut adam_arg = AdamState::new(&params.extractor, cfg.learning_rate);
    let mut adam_est = AdamState::new(&params.estimator, cfg.learning_rate);
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed ^ 0x9e37_79b9_7f4a_7c15);
    let mut order: Vec<usize> = (0..train.len()).collect();
    let mut online = BlackBoxDataset::default();

    for _epoch in 0..cfg.epochs {
        order.shuffle(&mut rng);
        for chunk in order.chunks(cfg.batch_size) {
            let batch: Vec<T::Sample> = chunk.iter().map(|&i| train[i].clone()).collect();
            let mut g = Graph::new();
            let arg_bound = params.extractor.bind(&mut g);
            let est_bound = params.estimator.bind(&mut g);
            let fwd = task.forward(&mut g, &arg_bound, &est_bound, &batch, Some(&mut rng))?;

            let t_loss = task.target_loss(&mut g, &fwd, &batch, cfg.label_smoothing)?;
            let entropy_rows = task.arg_entropy_rows(&fwd);
            let penalty = entropy_term(&mut g, entropy_rows, cfg.entropy)?;
            let arg_loss = g.add(t_loss, penalty)?;
            let target_v = g.values(t_loss)[0] as f64;
            let penalty_v = g.values(penalty)[0] as f64;
            if !target_v.is_finite() {
                return Err(EstiNetError::Divergence {
                    step,
                    what: format!("{} target loss", task.name()),
                    value: target_v,
                });
            }
            g.backward(arg_loss)?;
            let warmup = use_blackbox && step < cfg.online_warmup_steps;
            let arg_norm = params.extractor.take_grads(&g, &arg_bound);
            let mut est_norm = if end_to_end {
                let n = params.estimator.take_grads(&g, &est_bound);
                adam_est.step(&mut params.estimator)?;
                n
            } else {
                0.0
            };
            if !warmup {
                adam_arg.step(&mut params.extractor)?;
            }

            let mut bb_loss_v = None;
            let skipped_before = online.skipped;
            if use_blackbox && !params.estimator.frozen() {
                let entries_before = online.entries.len();
                let labels = collect_online_labels(task, &g, &fwd, &batch, &mut online, &mut rng);
                // The estimator learns from the forward prediction against
                // the queried labels; tasks may additionally train it on the
                // black-box dataset itself: this step's entries plus a
                // replay draw from the accumulated store, anchoring the
                // vertices past queries visited without extra queries.
                let mut bb_loss = task.blackbox_loss(&mut g, &fwd, &labels, cfg.label_smoothing)?;
                if task.blackbox_loss_on_entries() && online.entries.len() > entries_before {
                    let mut replay: Vec<BbEntry> =
                        online.entries[entries_before..].to_vec();
                    let want = cfg.batch_size.max(replay.len());
                    while replay.len() < 2 * want && entries_before > 0 {
                        let pick = rng.random_range(0..entries_before);
                        replay.push(online.entries[pick].clone());
                        if replay.len() >= 2 * want {
                            break;
                        }
                    }
                    let out = task.estimator_forward(&mut g, &est_bound, &replay)?;
                    let entries_loss =
                        task.estimator_loss(&mut g, out, &replay, cfg.label_smoothing)?;
                    bb_loss = Some(match bb_loss {
                        Some(soft) => g.add(soft, entries_loss)?,
                        None => entries_loss,
                    });
                }
                if let Some(bb_loss) = bb_loss {
                    let scaled = g.mul_scalar(bb_loss, cfg.beta as f32);
                    let bv = g.values(scaled)[0] as f64;
                    if !bv.is_finite() {
                        return Err(EstiNetError::Divergence {
                            step,
                            what: format!("{} black-box loss", task.name()),
                            value: bv,
                        });
                    }
                    g.backward(scaled)?;
                    est_norm = params.estimator.take_grads(&g, &est_bound);
                    adam_est.step(&mut params.estimator)?;
                    bb_loss_v = Some(bv);
                }
            }

            metrics.steps.push(StepRecord {
                step,
                phase: Phase::Joint,
                target_loss: target_v,
                blackbox_loss: bb_loss_v,
                entropy_term: penalty_v,
                extractor_grad_norm: arg_norm,
                estimator_grad_norm: est_norm,
                estimator_output_entropy: task.prediction_entropy(&g, &fwd),
                skipped_queries: online.skipped - skipped_before,
            });
            step += 1;
            hook(step, params)?;
        }
        online.truncate_front(ONLINE_CAP);
    }
    params.estimator.set_frozen(false);
    Ok(TrainOutcome { metrics, pretrain, online_entries: online })
}

/// Accuracy / error metrics for a dataset in the given mode. Train and test
/// modes run the identical estimator path; inference hardens arguments and
/// calls the real black box, never touching estimator parameters.
pub fn evaluate<T: EstiNetTask>(
    task: &T,
    params: &ModelParams,
    samples: &[T::Sample],
    mode: Mode,
    batch_size: usize,
) -> Result<EvalReport, EstiNetError> {
    let mut report = EvalReport { n: samples.len(), ..Default::default() };
    match mode {
        Mode::Train | Mode::Test => {
            for batch in samples.chunks(batch_size) {
                let mut g = Graph::new();
                let arg_bound = params.extractor.bind(&mut g);
                let est_bound = params.estimator.bind(&mut g);
                let fwd = task.forward(&mut g, &arg_bound, &est_bound, batch, None)?;
                let pred = task.prediction(&fwd);
                let width = g.numel(pred) / batch.len();
                let values = g.values(pred).to_vec();
                for (row, sample) in values.chunks(width).zip(batch) {
                    if task.prediction_matches(row, sample) {
                        report.correct += 1;
                    }
                    report.absolute_error_sum += task.prediction_error(row, sample);
                }
                if let Some((c, t)) = task.argument_accuracy(&g, &fwd, batch) {
                    report.argument_correct += c;
                    report.argument_total += t;
                }
            }
        }
        Mode::Inference => {
            for batch in samples.chunks(batch_size) {
                for sample in batch {
                    let mut g = Graph::new();
                    let arg_bound = params.extractor.bind(&mut g);
                    match task.infer(&mut g, &arg_bound, sample) {
                        Ok(out) => {
                            if task.output_matches(&out, sample) {
                                report.correct += 1;
                            }
                            report.absolute_error_sum += task.output_error(&out, sample);
                        }
                        Err(EstiNetError::BlackBox(_)) => {
                            // A miscalibrated extractor: count it wrong and
                            // surface the tally.
                            report.domain_violations += 1;
                            report.absolute_error_sum += task.violation_error(sample);
                        }
                        Err(other) => return Err(other),
                    }
                }
                // Argument accuracy still comes from the shared forward.
                let mut g = Graph::new();
                let arg_bound = params.extractor.bind(&mut g);
                let est_bound = params.estimator.bind(&mut g);
                let fwd = task.forward(&mut g, &arg_bound, &est_bound, batch, None)?;
                if let Some((c, t)) = task.argument_accuracy(&g, &fwd, batch) {
                    report.argument_correct += c;
                    report.argument_total += t;
                }
            }
        }
    }
    Ok(report)
}
