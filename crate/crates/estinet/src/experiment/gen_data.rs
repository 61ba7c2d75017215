//! Dataset file emission and auditing. Text datasets are line-delimited
//! JSON records; image corpora are IDX pairs; lookup tables are the plain
//! text format. Files are written to a temporary name and renamed into
//! place. The audit re-derives every label through the registry functions.

use std::fs;
use std::path::{Path, PathBuf};

use crate::blackbox::{bb_compare, bb_sum, bb_table_logic, LookupTable};
use crate::framework::EstiNetError;
use crate::tasks::image_seq::gen_image_lookup;
use crate::tasks::{
    gen_image_addition, gen_text_logic, gen_tll, generate_digit_corpus, load_mnist_idx,
    write_mnist_idx, TextLogicSample, TllSample,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GenTask {
    TextLogic,
    Tll,
    Digits,
    ImageAddition,
    ImageLookup,
}

impl GenTask {
    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "text-logic" => Some(GenTask::TextLogic),
            "tll" => Some(GenTask::Tll),
            "digits" => Some(GenTask::Digits),
            "image-addition" => Some(GenTask::ImageAddition),
            "image-lookup" => Some(GenTask::ImageLookup),
            _ => None,
        }
    }
}

fn write_atomically(path: &Path, contents: &str) -> Result<(), EstiNetError> {
    let tmp = path.with_extension("tmp");
    fs::write(&tmp, contents)?;
    fs::rename(&tmp, path)?;
    Ok(())
}

fn jsonl<T: serde::Serialize>(items: &[T]) -> String {
    let mut out = String::new();
    for item in items {
        out.push_str(&serde_json::to_string(item).unwrap());
        out.push('\n');
    }
    out
}

/// Generate the requested dataset under `out_dir`; returns written paths.
pub fn generate(
    task: GenTask,
    n: usize,
    k: usize,
    seed: u64,
    out_dir: &Path,
) -> Result<Vec<PathBuf>, EstiNetError> {
    fs::create_dir_all(out_dir)?;
    let mut written = Vec::new();
    match task {
        GenTask::TextLogic => {
            let train = gen_text_logic(n, seed, "train")?;
            let test = gen_text_logic(n.div_ceil(5), seed, "test")?;
            for (name, data) in [("text_logic_train.jsonl", train), ("text_logic_test.jsonl", test)] {
                let path = out_dir.join(name);
                write_atomically(&path, &jsonl(&data))?;
                written.push(path);
            }
        }
        GenTask::Tll => {
            let ds = gen_tll(n, n.div_ceil(5), seed)?;
            for (name, data) in [("tll_train.jsonl", ds.train), ("tll_test.jsonl", ds.test)] {
                let path = out_dir.join(name);
                write_atomically(&path, &jsonl(&data))?;
                written.push(path);
            }
        }
        GenTask::Digits => {
            let corpus = generate_digit_corpus(n, seed);
            let images = out_dir.join("train-images-idx3-ubyte");
            let labels = out_dir.join("train-labels-idx1-ubyte");
            write_mnist_idx(&corpus, &images, &labels)?;
            let test = generate_digit_corpus(n.div_ceil(6), seed + 1);
            let test_images = out_dir.join("t10k-images-idx3-ubyte");
            let test_labels = out_dir.join("t10k-labels-idx1-ubyte");
            write_mnist_idx(&test, &test_images, &test_labels)?;
            written.extend([images, labels, test_images, test_labels]);
        }
        GenTask::ImageAddition => {
            let corpus = generate_digit_corpus((n * k).max(1000), seed);
            let ds = gen_image_addition(&corpus, k, n, seed + 1)?;
            let path = out_dir.join("image_addition.jsonl");
            let records: Vec<serde_json::Value> = ds
                .samples
                .iter()
                .map(|s| {
                    serde_json::json!({
                        "image_indices": s.image_indices,
                        "hidden_digits": s.hidden_digits,
                        "label": s.label,
                    })
                })
                .collect();
            write_atomically(&path, &jsonl(&records))?;
            written.push(path);
        }
        GenTask::ImageLookup => {
            let corpus = generate_digit_corpus((n * k).max(1000), seed);
            let (ds, table) = gen_image_lookup(&corpus, k, n, seed + 1, seed + 2)?;
            let table_path = out_dir.join("lookup_table.txt");
            let mut buf = Vec::new();
            table.write_text(&mut buf).map_err(EstiNetError::Io)?;
            write_atomically(&table_path, &String::from_utf8(buf).unwrap())?;
            let path = out_dir.join("image_lookup.jsonl");
            let records: Vec<serde_json::Value> = ds
                .samples
                .iter()
                .map(|s| {
                    serde_json::json!({
                        "image_indices": s.image_indices,
                        "hidden_digits": s.hidden_digits,
                        "label": s.label,
                    })
                })
                .collect();
            write_atomically(&path, &jsonl(&records))?;
            written.extend([table_path, path]);
        }
    }
    Ok(written)
}

/// Re-derive every label in the generated files through the registry
/// functions; any mismatch is an error.
pub fn audit(task: GenTask, out_dir: &Path) -> Result<usize, EstiNetError> {
    let mut checked = 0usize;
    match task {
        GenTask::TextLogic => {
            for name in ["text_logic_train.jsonl", "text_logic_test.jsonl"] {
                let text = fs::read_to_string(out_dir.join(name))?;
                for line in text.lines() {
                    let s: TextLogicSample = serde_json::from_str(line)
                        .map_err(|e| EstiNetError::Config(e.to_string()))?;
                    let expected = bb_compare(s.x as f64, s.y as f64, s.op)?;
                    if expected != s.label {
                        return Err(EstiNetError::Config(format!(
                            "label mismatch for {:?}",
                            s.question
                        )));
                    }
                    checked += 1;
                }
            }
        }
        GenTask::Tll => {
            for name in ["tll_train.jsonl", "tll_test.jsonl"] {
                let text = fs::read_to_string(out_dir.join(name))?;
                for line in text.lines() {
                    let s: TllSample = serde_json::from_str(line)
                        .map_err(|e| EstiNetError::Config(e.to_string()))?;
                    let col = s.table.column(s.gold_column);
                    let expected = bb_table_logic(s.gold_op, &col, s.gold_scalar)?;
                    if expected != s.answer {
                        return Err(EstiNetError::Config(format!(
                            "answer mismatch for {:?}",
                            s.question
                        )));
                    }
                    checked += 1;
                }
            }
        }
        GenTask::Digits => {
            let data = load_mnist_idx(
                &out_dir.join("train-images-idx3-ubyte"),
                &out_dir.join("train-labels-idx1-ubyte"),
            )?;
            checked += data.len();
        }
        GenTask::ImageAddition => {
            let text = fs::read_to_string(out_dir.join("image_addition.jsonl"))?;
            for line in text.lines() {
                let v: serde_json::Value =
                    serde_json::from_str(line).map_err(|e| EstiNetError::Config(e.to_string()))?;
                let digits: Vec<usize> = v["hidden_digits"]
                    .as_array()
                    .unwrap()
                    .iter()
                    .map(|d| d.as_u64().unwrap() as usize)
                    .collect();
                let label = v["label"].as_f64().unwrap();
                if bb_sum(&digits)? as f64 != label {
                    return Err(EstiNetError::Config("sum label mismatch".into()));
                }
                checked += 1;
            }
        }
        GenTask::ImageLookup => {
            let table_text = fs::read_to_string(out_dir.join("lookup_table.txt"))?;
            let table = LookupTable::read_text(std::io::Cursor::new(table_text.into_bytes()))?;
            let text = fs::read_to_string(out_dir.join("image_lookup.jsonl"))?;
            for line in text.lines() {
                let v: serde_json::Value =
                    serde_json::from_str(line).map_err(|e| EstiNetError::Config(e.to_string()))?;
                let digits: Vec<usize> = v["hidden_digits"]
                    .as_array()
                    .unwrap()
                    .iter()
                    .map(|d| d.as_u64().unwrap() as usize)
                    .collect();
                let label = v["label"].as_f64().unwrap();
                if table.get(&digits)? as f64 != label {
                    return Err(EstiNetError::Config("lookup label mismatch".into()));
                }
                checked += 1;
            }
        }
    }
    Ok(checked)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn generation_is_byte_identical_per_seed_and_audits_clean() {
        let dir_a = std::env::temp_dir().join("estinet_gen_a");
        let dir_b = std::env::temp_dir().join("estinet_gen_b");
        let _ = fs::remove_dir_all(&dir_a);
        let _ = fs::remove_dir_all(&dir_b);
        generate(GenTask::TextLogic, 50, 0, 9, &dir_a).unwrap();
        generate(GenTask::TextLogic, 50, 0, 9, &dir_b).unwrap();
        let a = fs::read(dir_a.join("text_logic_train.jsonl")).unwrap();
        let b = fs::read(dir_b.join("text_logic_train.jsonl")).unwrap();
        assert_eq!(a, b);
        let checked = audit(GenTask::TextLogic, &dir_a).unwrap();
        assert_eq!(checked, 50 + 10);
    }

    #[test]
    fn tll_files_audit_against_the_registry() {
        let dir = std::env::temp_dir().join("estinet_gen_tll");
        let _ = fs::remove_dir_all(&dir);
        generate(GenTask::Tll, 40, 0, 3, &dir).unwrap();
        let checked = audit(GenTask::Tll, &dir).unwrap();
        assert_eq!(checked, 40 + 8);
    }

    #[test]
    fn lookup_files_audit_against_their_table() {
        let dir = std::env::temp_dir().join("estinet_gen_lookup");
        let _ = fs::remove_dir_all(&dir);
        generate(GenTask::ImageLookup, 30, 2, 4, &dir).unwrap();
        assert_eq!(audit(GenTask::ImageLookup, &dir).unwrap(), 30);
    }
}
