//! Experiment configuration files: JSON with schema validation that names
//! the offending field, plus a content hash that is stable under field
//! reordering.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::framework::{EstiNetError, Procedure, TrainingConfig};
use crate::models::TllModelConfig;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TaskId {
    TextLogic,
    ImageAddition,
    ImageLookup,
    Tll,
}

impl TaskId {
    pub fn name(self) -> &'static str {
        match self {
            TaskId::TextLogic => "text-logic",
            TaskId::ImageAddition => "image-addition",
            TaskId::ImageLookup => "image-lookup",
            TaskId::Tll => "text-lookup-logic",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModelChoice {
    EstiNet,
    /// Architecturally identical network trained end to end on task labels.
    Baseline,
    /// The actor-critic agent (image-addition only).
    Rl,
}

impl ModelChoice {
    pub fn name(self) -> &'static str {
        match self {
            ModelChoice::EstiNet => "estinet",
            ModelChoice::Baseline => "baseline",
            ModelChoice::Rl => "rl",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetParams {
    pub n_train: usize,
    pub n_test: usize,
    /// Sequence length / lookup dimension for the image tasks.
    #[serde(default)]
    pub k: Option<usize>,
    /// Backing image corpus sizes (synthetic fallback when no IDX files are
    /// present in the data directory).
    #[serde(default)]
    pub corpus_train: Option<usize>,
    #[serde(default)]
    pub corpus_test: Option<usize>,
    pub data_seed: u64,
    #[serde(default)]
    pub table_seed: Option<u64>,
    #[serde(default)]
    pub replacement_table_seed: Option<u64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalPlan {
    /// Evaluate in train/test/inference modes.
    #[serde(default = "default_true")]
    pub train_mode: bool,
    #[serde(default = "default_true")]
    pub test_mode: bool,
    #[serde(default = "default_true")]
    pub inference_mode: bool,
    /// Extra sequence lengths for generalization evaluation (image-addition).
    #[serde(default)]
    pub sequence_lengths: Vec<usize>,
    /// Evaluate against the replacement lookup table as well.
    #[serde(default)]
    pub replaced_table: bool,
}

fn default_true() -> bool {
    true
}

impl Default for EvalPlan {
    fn default() -> Self {
        EvalPlan {
            train_mode: true,
            test_mode: true,
            inference_mode: true,
            sequence_lengths: Vec::new(),
            replaced_table: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TllDims {
    pub layers: usize,
    pub heads: usize,
    pub width: usize,
    pub ff_width: usize,
}

impl From<TllDims> for TllModelConfig {
    fn from(d: TllDims) -> Self {
        TllModelConfig { layers: d.layers, heads: d.heads, width: d.width, ff_width: d.ff_width }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub task: TaskId,
    pub model: ModelChoice,
    pub training: TrainingConfig,
    pub dataset: DatasetParams,
    #[serde(default)]
    pub evaluation: EvalPlan,
    #[serde(default = "default_repeats")]
    pub repeats: usize,
    #[serde(default)]
    pub tll_dims: Option<TllDims>,
    #[serde(default)]
    pub out_dir: Option<PathBuf>,
}

fn default_repeats() -> usize {
    1
}

impl ExperimentConfig {
    /// Parse and validate, reporting the JSON path of schema errors.
    pub fn from_json(text: &str) -> Result<Self, EstiNetError> {
        let de = &mut serde_json::Deserializer::from_str(text);
        let cfg: ExperimentConfig = serde_path_to_error::deserialize(de).map_err(|e| {
            EstiNetError::Config(format!("config field `{}`: {}", e.path(), e.inner()))
        })?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn from_file(path: &Path) -> Result<Self, EstiNetError> {
        let text = std::fs::read_to_string(path)?;
        Self::from_json(&text)
    }

    pub fn validate(&self) -> Result<(), EstiNetError> {
        self.training.validate()?;
        if self.repeats == 0 {
            return Err(EstiNetError::Config("repeats must be at least 1".into()));
        }
        if self.dataset.n_train == 0 || self.dataset.n_test == 0 {
            return Err(EstiNetError::Config("dataset sizes must be positive".into()));
        }
        match self.task {
            TaskId::ImageAddition | TaskId::ImageLookup => {
                if self.dataset.k.is_none() {
                    return Err(EstiNetError::Config(format!(
                        "config field `dataset.k`: required for {}",
                        self.task.name()
                    )));
                }
            }
            TaskId::TextLogic | TaskId::Tll => {}
        }
        if self.task == TaskId::ImageLookup && self.dataset.table_seed.is_none() {
            return Err(EstiNetError::Config(
                "config field `dataset.table_seed`: required for image-lookup".into(),
            ));
        }
        if self.model == ModelChoice::Rl && self.task != TaskId::ImageAddition {
            return Err(EstiNetError::Config(
                "config field `model`: rl applies to image_addition only".into(),
            ));
        }
        if self.model == ModelChoice::Baseline && self.training.procedure != Procedure::EndToEnd {
            return Err(EstiNetError::Config(
                "config field `training.procedure`: the baseline trains end_to_end".into(),
            ));
        }
        Ok(())
    }

    /// FNV-1a hash of the canonical (key-sorted) JSON encoding; stable under
    /// field reordering of the source file.
    pub fn content_hash(&self) -> String {
        let value = serde_json::to_value(self).expect("config serializes");
        let mut canonical = String::new();
        canonicalize(&value, &mut canonical);
        format!("{:016x}", fnv1a(canonical.as_bytes()))
    }
}

fn canonicalize(value: &serde_json::Value, out: &mut String) {
    match value {
        serde_json::Value::Object(map) => {
            let sorted: BTreeMap<_, _> = map.iter().collect();
            out.push('{');
            for (i, (k, v)) in sorted.iter().enumerate() {
                if i > 0 {
                    out.push(',');
                }
                out.push_str(&format!("{k:?}:"));
                canonicalize(v, out);
            }
            out.push('}');
        }
        serde_json::Value::Array(items) => {
            out.push('[');
            for (i, v) in items.iter().enumerate() {
                if i > 0 {
                    out.push(',');
                }
                canonicalize(v, out);
            }
            out.push(']');
        }
        other => out.push_str(&other.to_string()),
    }
}

fn fnv1a(bytes: &[u8]) -> u64 {
    let mut h: u64 = 0xcbf29ce484222325;
    for &b in bytes {
        h ^= b as u64;
        h = h.wrapping_mul(0x100000001b3);
    }
    h
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::framework::EntropyReg;

    fn demo() -> ExperimentConfig {
        ExperimentConfig {
            task: TaskId::TextLogic,
            model: ModelChoice::EstiNet,
            training: TrainingConfig {
                procedure: Procedure::Online,
                entropy: EntropyReg::Off,
                ..Default::default()
            },
            dataset: DatasetParams {
                n_train: 250,
                n_test: 400,
                k: None,
                corpus_train: None,
                corpus_test: None,
                data_seed: 1,
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
    fn hash_is_stable_under_field_reordering() {
        let cfg = demo();
        let json_a = serde_json::to_string(&cfg).unwrap();
        // Round-trip through a Value with shuffled insertion order.
        let value: serde_json::Value = serde_json::from_str(&json_a).unwrap();
        let serde_json::Value::Object(map) = value else { panic!() };
        let mut reordered = serde_json::Map::new();
        for (k, v) in map.iter().rev() {
            reordered.insert(k.clone(), v.clone());
        }
        let json_b = serde_json::to_string(&serde_json::Value::Object(reordered)).unwrap();
        let a = ExperimentConfig::from_json(&json_a).unwrap();
        let b = ExperimentConfig::from_json(&json_b).unwrap();
        assert_eq!(a.content_hash(), b.content_hash());
    }

    #[test]
    fn hash_changes_with_meaningful_fields() {
        let a = demo();
        let mut b = demo();
        b.dataset.n_train = 251;
        assert_ne!(a.content_hash(), b.content_hash());
    }

    #[test]
    fn unknown_task_reports_the_field_path() {
        let json = serde_json::to_string(&demo()).unwrap().replace("text_logic", "word_logic");
        let err = ExperimentConfig::from_json(&json).unwrap_err().to_string();
        assert!(err.contains("task"), "error was: {err}");
    }

    #[test]
    fn image_tasks_require_k() {
        let mut cfg = demo();
        cfg.task = TaskId::ImageLookup;
        let err = cfg.validate().unwrap_err().to_string();
        assert!(err.contains("dataset.k"), "error was: {err}");
    }
}
