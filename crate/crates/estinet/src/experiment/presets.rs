//! Canonical experiment configurations. Desk scale fits a laptop-class CPU
//! budget; paper scale mirrors the published dataset sizes.

use crate::framework::{EntropyReg, PretrainConfig, Procedure, TrainingConfig};

use super::config::{DatasetParams, EvalPlan, ExperimentConfig, ModelChoice, TaskId, TllDims};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Scale {
    Desk,
    Paper,
}

impl Scale {
    pub fn parse(s: &str) -> Option<Scale> {
        match s {
            "desk" => Some(Scale::Desk),
            "paper" => Some(Scale::Paper),
            _ => None,
        }
    }
}

fn dataset(n_train: usize, n_test: usize, data_seed: u64) -> DatasetParams {
    DatasetParams {
        n_train,
        n_test,
        k: None,
        corpus_train: None,
        corpus_test: None,
        data_seed,
        table_seed: None,
        replacement_table_seed: None,
    }
}

/// Text-Logic with online training. The online procedure warms the
/// estimator up on its own sampled queries before the extractor moves;
/// the total step budget stays fixed across train-set sizes.
pub fn text_logic_estinet(n_train: usize, seed: u64) -> ExperimentConfig {
    let warmup = 3000usize;
    let joint = 4000usize;
    let batch = 25usize;
    let steps_per_epoch = n_train.div_ceil(batch);
    let epochs = (warmup + joint).div_ceil(steps_per_epoch);
    ExperimentConfig {
        task: TaskId::TextLogic,
        model: ModelChoice::EstiNet,
        training: TrainingConfig {
            procedure: Procedure::Online,
            beta: 1.0,
            entropy: EntropyReg::Off,
            label_smoothing: 0.1,
            learning_rate: 0.001,
            batch_size: batch,
            epochs,
            pretrain: PretrainConfig { max_epochs: 0, ..Default::default() },
            online_warmup_steps: warmup,
            seed,
        },
        dataset: dataset(n_train, 500, 40),
        evaluation: EvalPlan::default(),
        repeats: 1,
        tll_dims: None,
        out_dir: None,
    }
}

/// The architecturally identical end-to-end baseline, same step budget.
pub fn text_logic_baseline(n_train: usize, seed: u64) -> ExperimentConfig {
    let mut cfg = text_logic_estinet(n_train, seed);
    cfg.model = ModelChoice::Baseline;
    cfg.training.procedure = Procedure::EndToEnd;
    cfg.training.online_warmup_steps = 0;
    cfg
}

/// Image-Lookup with the hybrid procedure.
pub fn image_lookup_estinet(k: usize, scale: Scale, seed: u64) -> ExperimentConfig {
    let (n_train, corpus_train, epochs) = match scale {
        Scale::Desk => (3000, 6000, 8),
        Scale::Paper => (30_000, 60_000, 5),
    };
    ExperimentConfig {
        task: TaskId::ImageLookup,
        model: ModelChoice::EstiNet,
        training: TrainingConfig {
            procedure: Procedure::Hybrid,
            beta: 1.0,
            entropy: EntropyReg::Off,
            label_smoothing: 0.6,
            learning_rate: 0.001,
            batch_size: 20,
            epochs,
            pretrain: PretrainConfig {
                samples_per_epoch: 3000,
                holdout: 400,
                batch_size: 50,
                max_epochs: 15,
                target_accuracy: 0.9,
                patience: 5,
            },
            online_warmup_steps: 0,
            seed,
        },
        dataset: DatasetParams {
            n_train,
            n_test: 500,
            k: Some(k),
            corpus_train: Some(corpus_train),
            corpus_test: Some(1000),
            data_seed: 50,
            table_seed: Some(404),
            replacement_table_seed: Some(405),
        },
        evaluation: EvalPlan { replaced_table: true, ..Default::default() },
        repeats: 1,
        tll_dims: None,
        out_dir: None,
    }
}

/// Image-Addition trained at `k_train`, evaluated also at the longer
/// sequence lengths in the plan.
pub fn image_addition_estinet(k_train: usize, scale: Scale, seed: u64) -> ExperimentConfig {
    let (n_train, corpus_train, epochs) = match scale {
        Scale::Desk => (2000, 6000, 6),
        Scale::Paper => (12_000, 60_000, 5),
    };
    ExperimentConfig {
        task: TaskId::ImageAddition,
        model: ModelChoice::EstiNet,
        training: TrainingConfig {
            procedure: Procedure::Hybrid,
            beta: 1.0,
            entropy: EntropyReg::Off,
            label_smoothing: 0.0,
            learning_rate: 0.001,
            batch_size: 50,
            epochs,
            pretrain: PretrainConfig {
                samples_per_epoch: 2000,
                holdout: 300,
                batch_size: 50,
                max_epochs: 15,
                target_accuracy: 0.9,
                patience: 5,
            },
            online_warmup_steps: 0,
            seed,
        },
        dataset: DatasetParams {
            n_train,
            n_test: 300,
            k: Some(k_train),
            corpus_train: Some(corpus_train),
            corpus_test: Some(1000),
            data_seed: 60,
            table_seed: None,
            replacement_table_seed: None,
        },
        evaluation: EvalPlan { sequence_lengths: vec![100], ..Default::default() },
        repeats: 1,
        tll_dims: None,
        out_dir: None,
    }
}

pub fn image_addition_baseline(k_train: usize, scale: Scale, seed: u64) -> ExperimentConfig {
    let mut cfg = image_addition_estinet(k_train, scale, seed);
    cfg.model = ModelChoice::Baseline;
    cfg.training.procedure = Procedure::EndToEnd;
    cfg.training.pretrain.max_epochs = 0;
    cfg
}

/// TLL under the given procedure.
pub fn tll(procedure: Procedure, scale: Scale, seed: u64) -> ExperimentConfig {
    let (n_train, n_test, epochs, repeats) = match scale {
        Scale::Desk => (4000, 800, 10, 3),
        Scale::Paper => (20_000, 4000, 10, 10),
    };
    ExperimentConfig {
        task: TaskId::Tll,
        model: ModelChoice::EstiNet,
        training: TrainingConfig {
            procedure,
            beta: 1.0,
            entropy: EntropyReg::Off,
            label_smoothing: 0.1,
            learning_rate: 0.001,
            batch_size: 20,
            epochs,
            pretrain: PretrainConfig {
                samples_per_epoch: 1500,
                holdout: 300,
                batch_size: 30,
                max_epochs: 10,
                target_accuracy: 0.9,
                patience: 4,
            },
            online_warmup_steps: 0,
            seed,
        },
        dataset: dataset(n_train, n_test, 70),
        evaluation: EvalPlan::default(),
        repeats,
        tll_dims: Some(TllDims { layers: 1, heads: 2, width: 32, ff_width: 64 }),
        out_dir: None,
    }
}
