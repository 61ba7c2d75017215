//! Experiment execution: builds the configured task and model, trains with
//! the configured procedure, evaluates in each requested mode, and writes
//! run records and checkpoints.

use std::collections::BTreeMap;
use std::path::PathBuf;
use std::sync::Arc;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::framework::training::estimator_accuracy;
use crate::framework::{
    evaluate, save_checkpoint, train_procedure, EstiNetError, EstiNetTask, Mode, ModelParams,
    TrainOutcome,
};
use crate::models::{ImageAdditionModel, ImageLookupModel, TextLogicModel, TllModel, TllModelConfig};
use crate::rl::{train_agent, A2cConfig, LearningCurve};
use crate::tasks::image_seq::relabel_with_table;
use crate::tasks::mnist::MnistData;
use crate::tasks::{gen_image_addition, gen_image_lookup, gen_text_logic, gen_tll};
use crate::blackbox::LookupTable;

use super::config::{ExperimentConfig, ModelChoice, TaskId};

/// Environment variable naming the directory with real MNIST IDX files; the
/// deterministic synthetic digit corpus is the fallback.
pub const DATA_DIR_ENV: &str = "ESTINET_DATA_DIR";

/// Load the named IDX pair from the data directory, or synthesize digits.
pub fn resolve_corpus(prefix: &str, synthetic_n: usize, seed: u64) -> MnistData {
    if let Ok(dir) = std::env::var(DATA_DIR_ENV) {
        let dir = PathBuf::from(dir);
        let images = dir.join(format!("{prefix}-images-idx3-ubyte"));
        let labels = dir.join(format!("{prefix}-labels-idx1-ubyte"));
        if images.exists() && labels.exists() {
            if let Ok(data) = crate::tasks::load_mnist_idx(&images, &labels) {
                return data.truncated(synthetic_n);
            }
        }
    }
    crate::tasks::generate_digit_corpus(synthetic_n, seed)
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunRecord {
    pub config_hash: String,
    pub task: String,
    pub model: String,
    pub procedure: String,
    pub seed: u64,
    /// Final metrics per mode and probe, e.g. "test.accuracy".
    pub final_metrics: BTreeMap<String, f64>,
    /// Coarse per-step training metrics (every `stride` steps).
    pub step_stride: usize,
    pub target_loss_curve: Vec<f64>,
    pub extractor_grad_norms: Vec<f64>,
    pub estimator_entropies: Vec<f64>,
    pub pretrain_epochs: Option<usize>,
    pub pretrain_exit_accuracy: Option<f64>,
    pub wall_clock_secs: f64,
    pub artifacts: Vec<PathBuf>,
}

fn record_outcome(
    record: &mut RunRecord,
    outcome: &TrainOutcome,
) {
    let stride = (outcome.metrics.steps.len() / 200).max(1);
    record.step_stride = stride;
    for s in outcome.metrics.steps.iter().step_by(stride) {
        record.target_loss_curve.push(s.target_loss);
        record.extractor_grad_norms.push(s.extractor_grad_norm);
        record
            .estimator_entropies
            .push(s.estimator_output_entropy.unwrap_or(f64::NAN));
    }
    if let Some(p) = &outcome.pretrain {
        record.pretrain_epochs = Some(p.epochs_run);
        record.pretrain_exit_accuracy = Some(p.exit_accuracy);
    }
}

fn eval_into<T: EstiNetTask>(
    record: &mut RunRecord,
    task: &T,
    params: &ModelParams,
    samples: &[T::Sample],
    mode: Mode,
    key: &str,
) -> Result<(), EstiNetError> {
    let report = evaluate(task, params, samples, mode, 50)?;
    record.final_metrics.insert(format!("{key}.accuracy"), report.accuracy());
    if task.is_regression() {
        record.final_metrics.insert(format!("{key}.mae"), report.mae());
    }
    if let Some(a) = report.argument_accuracy() {
        record.final_metrics.insert(format!("{key}.argument_accuracy"), a);
    }
    if report.domain_violations > 0 {
        record
            .final_metrics
            .insert(format!("{key}.domain_violations"), report.domain_violations as f64);
    }
    Ok(())
}

fn base_record(cfg: &ExperimentConfig, seed: u64) -> RunRecord {
    RunRecord {
        config_hash: cfg.content_hash(),
        task: cfg.task.name().to_string(),
        model: cfg.model.name().to_string(),
        procedure: format!("{:?}", cfg.training.procedure).to_lowercase(),
        seed,
        final_metrics: BTreeMap::new(),
        step_stride: 1,
        target_loss_curve: Vec::new(),
        extractor_grad_norms: Vec::new(),
        estimator_entropies: Vec::new(),
        pretrain_epochs: None,
        pretrain_exit_accuracy: None,
        wall_clock_secs: 0.0,
        artifacts: Vec::new(),
    }
}

/// Execute one seed of the configured experiment.
pub fn run_single(cfg: &ExperimentConfig, seed: u64) -> Result<RunRecord, EstiNetError> {
    let started = Instant::now();
    let mut record = base_record(cfg, seed);
    let mut training = cfg.training.clone();
    training.seed = seed;

    match (cfg.task, cfg.model) {
        (TaskId::TextLogic, ModelChoice::EstiNet | ModelChoice::Baseline) => {
            let train = gen_text_logic(cfg.dataset.n_train, cfg.dataset.data_seed, "train")?;
            let test = gen_text_logic(cfg.dataset.n_test, cfg.dataset.data_seed, "test")?;
            let (model, mut params) = TextLogicModel::build(seed);
            let outcome = train_procedure(&model, &mut params, &train, &training, |_, _| Ok(()))?;
            record_outcome(&mut record, &outcome);
            if cfg.evaluation.train_mode {
                eval_into(&mut record, &model, &params, &train, Mode::Train, "train")?;
            }
            if cfg.evaluation.test_mode {
                eval_into(&mut record, &model, &params, &test, Mode::Test, "test")?;
            }
            if cfg.evaluation.inference_mode {
                eval_into(&mut record, &model, &params, &test, Mode::Inference, "inference")?;
            }
            if !outcome.online_entries.is_empty() {
                let acc = estimator_accuracy(&model, &params, &outcome.online_entries.entries)?;
                record.final_metrics.insert("estimator.online_accuracy".into(), acc);
            }
            save_artifacts(cfg, &mut record, &training, &params)?;
        }
        (TaskId::ImageAddition, ModelChoice::EstiNet | ModelChoice::Baseline) => {
            let k = cfg.dataset.k.unwrap();
            let corpus = Arc::new(resolve_corpus(
                "train",
                cfg.dataset.corpus_train.unwrap_or(6000),
                cfg.dataset.data_seed,
            ));
            let test_corpus = Arc::new(resolve_corpus(
                "t10k",
                cfg.dataset.corpus_test.unwrap_or(1000),
                cfg.dataset.data_seed + 1,
            ));
            let train_ds = gen_image_addition(&corpus, k, cfg.dataset.n_train, cfg.dataset.data_seed)?;
            let test_ds =
                gen_image_addition(&test_corpus, k, cfg.dataset.n_test, cfg.dataset.data_seed + 2)?;
            let (model, mut params) = ImageAdditionModel::build(corpus.clone(), k, seed);
            let outcome =
                train_procedure(&model, &mut params, &train_ds.samples, &training, |_, _| Ok(()))?;
            record_outcome(&mut record, &outcome);
            let (eval_model, _) = ImageAdditionModel::build(test_corpus.clone(), k, seed);
            if cfg.evaluation.test_mode {
                eval_into(&mut record, &eval_model, &params, &test_ds.samples, Mode::Test, "test")?;
            }
            if cfg.evaluation.inference_mode {
                eval_into(
                    &mut record,
                    &eval_model,
                    &params,
                    &test_ds.samples,
                    Mode::Inference,
                    "inference",
                )?;
            }
            for &len in &cfg.evaluation.sequence_lengths {
                let long = gen_image_addition(
                    &test_corpus,
                    len,
                    cfg.dataset.n_test.min(200),
                    cfg.dataset.data_seed + 3,
                )?;
                eval_into(
                    &mut record,
                    &eval_model,
                    &params,
                    &long.samples,
                    Mode::Test,
                    &format!("test_k{len}"),
                )?;
                eval_into(
                    &mut record,
                    &eval_model,
                    &params,
                    &long.samples,
                    Mode::Inference,
                    &format!("inference_k{len}"),
                )?;
            }
            save_artifacts(cfg, &mut record, &training, &params)?;
        }
        (TaskId::ImageLookup, ModelChoice::EstiNet | ModelChoice::Baseline) => {
            let k = cfg.dataset.k.unwrap();
            let table_seed = cfg.dataset.table_seed.unwrap();
            let corpus = Arc::new(resolve_corpus(
                "train",
                cfg.dataset.corpus_train.unwrap_or(6000),
                cfg.dataset.data_seed,
            ));
            let test_corpus = Arc::new(resolve_corpus(
                "t10k",
                cfg.dataset.corpus_test.unwrap_or(1000),
                cfg.dataset.data_seed + 1,
            ));
            let (train_ds, table) =
                gen_image_lookup(&corpus, k, cfg.dataset.n_train, cfg.dataset.data_seed, table_seed)?;
            let (test_ds, _) = gen_image_lookup(
                &test_corpus,
                k,
                cfg.dataset.n_test,
                cfg.dataset.data_seed + 2,
                table_seed,
            )?;
            let (model, mut params) = ImageLookupModel::build(corpus.clone(), table.clone(), seed);
            let outcome =
                train_procedure(&model, &mut params, &train_ds.samples, &training, |_, _| Ok(()))?;
            record_outcome(&mut record, &outcome);
            let (eval_model, _) = ImageLookupModel::build(test_corpus.clone(), table.clone(), seed);
            if cfg.evaluation.train_mode {
                eval_into(&mut record, &model, &params, &train_ds.samples, Mode::Train, "train")?;
            }
            if cfg.evaluation.test_mode {
                eval_into(&mut record, &eval_model, &params, &test_ds.samples, Mode::Test, "test")?;
            }
            if cfg.evaluation.inference_mode {
                eval_into(
                    &mut record,
                    &eval_model,
                    &params,
                    &test_ds.samples,
                    Mode::Inference,
                    "inference",
                )?;
            }
            if !outcome.online_entries.is_empty() {
                let acc = estimator_accuracy(&model, &params, &outcome.online_entries.entries)?;
                record.final_metrics.insert("estimator.online_accuracy".into(), acc);
            }
            if cfg.evaluation.replaced_table {
                let replacement_seed = cfg.dataset.replacement_table_seed.unwrap_or(table_seed + 1);
                let replacement = LookupTable::random(k, replacement_seed);
                let swapped = relabel_with_table(&test_ds, &replacement)?;
                // Test mode still runs the estimator trained on the old
                // table; inference swaps the real replaced table in.
                let (mut swap_model, _) =
                    ImageLookupModel::build(test_corpus.clone(), table.clone(), seed);
                swap_model.replace_table(replacement);
                eval_into(
                    &mut record,
                    &swap_model,
                    &params,
                    &swapped.samples,
                    Mode::Test,
                    "replaced_test",
                )?;
                eval_into(
                    &mut record,
                    &swap_model,
                    &params,
                    &swapped.samples,
                    Mode::Inference,
                    "replaced_inference",
                )?;
            }
            save_artifacts(cfg, &mut record, &training, &params)?;
        }
        (TaskId::Tll, ModelChoice::EstiNet | ModelChoice::Baseline) => {
            let ds = gen_tll(cfg.dataset.n_train, cfg.dataset.n_test, cfg.dataset.data_seed)?;
            let dims: TllModelConfig = cfg
                .tll_dims
                .clone()
                .map(Into::into)
                .unwrap_or_default();
            let (model, mut params) = TllModel::build(dims, seed)?;
            let outcome = train_procedure(&model, &mut params, &ds.train, &training, |_, _| Ok(()))?;
            record_outcome(&mut record, &outcome);
            if cfg.evaluation.train_mode {
                let sub = &ds.train[..ds.train.len().min(400)];
                eval_into(&mut record, &model, &params, sub, Mode::Train, "train")?;
            }
            if cfg.evaluation.test_mode {
                eval_into(&mut record, &model, &params, &ds.test, Mode::Test, "test")?;
            }
            if cfg.evaluation.inference_mode {
                eval_into(&mut record, &model, &params, &ds.test, Mode::Inference, "inference")?;
            }
            save_artifacts(cfg, &mut record, &training, &params)?;
        }
        (TaskId::ImageAddition, ModelChoice::Rl) => {
            let k = cfg.dataset.k.unwrap();
            let corpus = resolve_corpus(
                "train",
                cfg.dataset.corpus_train.unwrap_or(6000),
                cfg.dataset.data_seed,
            );
            let test_corpus = resolve_corpus(
                "t10k",
                cfg.dataset.corpus_test.unwrap_or(1000),
                cfg.dataset.data_seed + 1,
            );
            let a2c = A2cConfig {
                k,
                max_updates: cfg.dataset.n_train,
                seed,
                ..Default::default()
            };
            let (log, _) = train_agent(&a2c, &corpus, &test_corpus, 500)?;
            let curve = LearningCurve::from_a2c(&log, "rl");
            if let Some((updates, best)) = curve.best() {
                record.final_metrics.insert("rl.best_accuracy".into(), best);
                record.final_metrics.insert("rl.best_updates".into(), updates as f64);
            }
            record.final_metrics.insert("rl.total_updates".into(), log.total_updates as f64);
            if let Some(dir) = &cfg.out_dir {
                std::fs::create_dir_all(dir)?;
                let path = dir.join(format!("rl_curve_seed{seed}.json"));
                std::fs::write(&path, serde_json::to_string_pretty(&curve).unwrap())?;
                record.artifacts.push(path);
            }
        }
        (task, model) => {
            return Err(EstiNetError::Config(format!(
                "model {} does not apply to task {}",
                model.name(),
                task.name()
            )));
        }
    }
    record.wall_clock_secs = started.elapsed().as_secs_f64();
    Ok(record)
}

fn save_artifacts(
    cfg: &ExperimentConfig,
    record: &mut RunRecord,
    training: &crate::framework::TrainingConfig,
    params: &ModelParams,
) -> Result<(), EstiNetError> {
    let Some(dir) = &cfg.out_dir else {
        return Ok(());
    };
    std::fs::create_dir_all(dir)?;
    let ckpt = dir.join(format!(
        "{}_{}_seed{}.esnt",
        cfg.task.name(),
        cfg.model.name(),
        record.seed
    ));
    save_checkpoint(
        &ckpt,
        training,
        &[("extractor", &params.extractor), ("estimator", &params.estimator)],
    )?;
    record.artifacts.push(ckpt);
    Ok(())
}

/// Execute every repeat of the experiment; repeats run in parallel worker
/// threads, each with its own seed and state.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<Vec<RunRecord>, EstiNetError> {
    cfg.validate()?;
    let seeds: Vec<u64> = (0..cfg.repeats as u64).map(|r| cfg.training.seed + r).collect();
    if seeds.len() == 1 {
        return Ok(vec![run_single(cfg, seeds[0])?]);
    }
    let mut records: Vec<Option<RunRecord>> = (0..seeds.len()).map(|_| None).collect();
    std::thread::scope(|scope| -> Result<(), EstiNetError> {
        let mut handles = Vec::new();
        for (slot, &seed) in seeds.iter().enumerate() {
            let cfg = cfg.clone();
            handles.push((slot, scope.spawn(move || run_single(&cfg, seed))));
        }
        for (slot, handle) in handles {
            let record = handle.join().expect("worker panicked")?;
            records[slot] = Some(record);
        }
        Ok(())
    })?;
    Ok(records.into_iter().map(|r| r.unwrap()).collect())
}

/// Write one run record per line (JSON) plus a pretty side file.
pub fn write_records(records: &[RunRecord], out_dir: &std::path::Path) -> Result<PathBuf, EstiNetError> {
    std::fs::create_dir_all(out_dir)?;
    let path = out_dir.join("run_records.jsonl");
    let mut text = String::new();
    for r in records {
        text.push_str(&serde_json::to_string(r).unwrap());
        text.push('\n');
    }
    std::fs::write(&path, text)?;
    Ok(path)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::framework::{EntropyReg, Procedure, TrainingConfig};
    use crate::experiment::config::{DatasetParams, EvalPlan};

    fn tiny_config() -> ExperimentConfig {
        ExperimentConfig {
            task: TaskId::TextLogic,
            model: ModelChoice::EstiNet,
            training: TrainingConfig {
                procedure: Procedure::Online,
                entropy: EntropyReg::Off,
                epochs: 2,
                batch_size: 10,
                ..Default::default()
            },
            dataset: DatasetParams {
                n_train: 30,
                n_test: 20,
                k: None,
                corpus_train: None,
                corpus_test: None,
                data_seed: 3,
                table_seed: None,
                replacement_table_seed: None,
            },
            evaluation: EvalPlan::default(),
            repeats: 1,
            tll_dims: None,
            out_dir: None,
        }
    }

    #[test]
    fn identical_config_and_seed_reproduce_final_metrics() {
        let cfg = tiny_config();
        let a = run_single(&cfg, 7).unwrap();
        let b = run_single(&cfg, 7).unwrap();
        assert_eq!(a.final_metrics, b.final_metrics);
        assert_eq!(a.config_hash, b.config_hash);
    }

    #[test]
    fn repeats_produce_one_record_per_seed() {
        let mut cfg = tiny_config();
        cfg.repeats = 2;
        let records = run_experiment(&cfg).unwrap();
        assert_eq!(records.len(), 2);
        assert_ne!(records[0].seed, records[1].seed);
    }
}
