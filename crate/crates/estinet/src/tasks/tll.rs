//! Table question answering data: 25-row, 5-column tables (entity names
//! plus four integer-valued properties) and questions covering the five row
//! logic operations. Train tables draw cell values from [1, 100], test
//! tables from [300, 400], so the value ranges never overlap.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::blackbox::{bb_table_logic, TableOp, TABLE_OPS};

use super::tokenizer::Vocab;
use super::DataError;

pub const TABLE_ROWS: usize = 25;
pub const NUMERIC_COLUMNS: usize = 4;

const ENTITY_NAMES: &str = include_str!("../../data/entities.txt");

const ENTITY_KINDS: [&str; 4] = ["countries", "teams", "clubs", "nations"];

const PROPERTIES: [&str; 12] = [
    "gold medals",
    "silver medals",
    "bronze medals",
    "points",
    "wins",
    "losses",
    "draws",
    "goals",
    "titles",
    "appearances",
    "trophies",
    "podiums",
];

pub fn entity_names() -> Vec<&'static str> {
    ENTITY_NAMES.lines().filter(|l| !l.is_empty()).collect()
}

#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct Table {
    /// First column: entity names.
    pub entities: Vec<String>,
    /// Headers of the four numeric columns.
    pub headers: Vec<String>,
    /// Row-major numeric cells, `TABLE_ROWS x NUMERIC_COLUMNS`, integral.
    pub cells: Vec<f64>,
}

impl Table {
    pub fn column(&self, c: usize) -> Vec<f64> {
        (0..TABLE_ROWS).map(|r| self.cells[r * NUMERIC_COLUMNS + c]).collect()
    }
}

#[derive(Debug, Clone, serde::Serialize, serde::Deserialize)]
pub struct TllSample {
    pub question: String,
    pub table: Table,
    /// Gold program, for evaluation only.
    pub gold_op: TableOp,
    pub gold_column: usize,
    pub gold_scalar: Option<f64>,
    /// Token index of the scalar argument inside the question, when present.
    pub gold_scalar_token: Option<usize>,
    /// Row-indicator answer.
    pub answer: Vec<bool>,
}

impl TllSample {
    /// Render the answer as entity names (the label adapter's output form).
    pub fn answer_names(&self) -> Vec<&str> {
        self.answer
            .iter()
            .zip(&self.table.entities)
            .filter(|(&sel, _)| sel)
            .map(|(_, name)| name.as_str())
            .collect()
    }
}

fn gen_table(rng: &mut ChaCha8Rng, lo: u32, hi: u32) -> Table {
    let names = entity_names();
    let mut pool: Vec<usize> = (0..names.len()).collect();
    let mut entities = Vec::with_capacity(TABLE_ROWS);
    for _ in 0..TABLE_ROWS {
        let pick = rng.random_range(0..pool.len());
        entities.push(names[pool.swap_remove(pick)].to_string());
    }
    let mut prop_pool: Vec<usize> = (0..PROPERTIES.len()).collect();
    let headers = (0..NUMERIC_COLUMNS)
        .map(|_| {
            let pick = rng.random_range(0..prop_pool.len());
            PROPERTIES[prop_pool.swap_remove(pick)].to_string()
        })
        .collect();
    let cells = (0..TABLE_ROWS * NUMERIC_COLUMNS)
        .map(|_| rng.random_range(lo..=hi) as f64)
        .collect();
    Table { entities, headers, cells }
}

fn render_question(
    rng: &mut ChaCha8Rng,
    op: TableOp,
    header: &str,
    scalar: Option<f64>,
) -> String {
    let kind = ENTITY_KINDS[rng.random_range(0..ENTITY_KINDS.len())];
    let v = scalar.map(|s| format!("{s}"));
    match op {
        TableOp::EqualTo => {
            let v = v.unwrap();
            match rng.random_range(0..2) {
                0 => format!("which {kind} have {header} equal to {v} ?"),
                _ => format!("which {kind} have exactly {v} {header} ?"),
            }
        }
        TableOp::LessThan => {
            let v = v.unwrap();
            match rng.random_range(0..2) {
                0 => format!("which {kind} have {header} less than {v} ?"),
                _ => format!("which {kind} won fewer than {v} {header} ?"),
            }
        }
        TableOp::GreaterThan => {
            let v = v.unwrap();
            match rng.random_range(0..2) {
                0 => format!("which {kind} have {header} greater than {v} ?"),
                _ => format!("which {kind} won more than {v} {header} ?"),
            }
        }
        TableOp::Max => match rng.random_range(0..2) {
            0 => format!("which {kind} have the highest {header} ?"),
            _ => format!("which {kind} have maximal {header} ?"),
        },
        TableOp::Min => match rng.random_range(0..2) {
            0 => format!("which {kind} have the lowest {header} ?"),
            _ => format!("which {kind} have minimal {header} ?"),
        },
    }
}

fn gen_questions(
    n: usize,
    rng: &mut ChaCha8Rng,
    lo: u32,
    hi: u32,
) -> Result<Vec<TllSample>, DataError> {
    (0..n)
        .map(|_| {
            let table = gen_table(rng, lo, hi);
            let op = TABLE_OPS[rng.random_range(0..TABLE_OPS.len())];
            let column = rng.random_range(0..NUMERIC_COLUMNS);
            let col_values = table.column(column);
            let scalar = if op.needs_scalar() {
                // For equality questions pick an existing cell so the answer
                // is usually non-empty; for inequalities any in-range value.
                Some(match op {
                    TableOp::EqualTo => col_values[rng.random_range(0..TABLE_ROWS)],
                    _ => rng.random_range(lo..=hi) as f64,
                })
            } else {
                None
            };
            let question = render_question(rng, op, &table.headers[column], scalar);
            let answer = bb_table_logic(op, &col_values, scalar)
                .map_err(|e| DataError::Invalid(e.to_string()))?;
            let gold_scalar_token = scalar.map(|s| {
                let rendered = format!("{s}");
                question
                    .split_whitespace()
                    .position(|t| t == rendered)
                    .expect("scalar token present")
            });
            Ok(TllSample {
                question,
                table,
                gold_op: op,
                gold_column: column,
                gold_scalar: scalar,
                gold_scalar_token,
                answer,
            })
        })
        .collect()
}

#[derive(Debug, Clone)]
pub struct TllDataset {
    pub train: Vec<TllSample>,
    pub test: Vec<TllSample>,
}

/// Paper-scale defaults are 20,000 / 4,000.
pub fn gen_tll(n_train: usize, n_test: usize, seed: u64) -> Result<TllDataset, DataError> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let train = gen_questions(n_train, &mut rng, 1, 100)?;
    let test = gen_questions(n_test, &mut rng, 300, 400)?;
    Ok(TllDataset { train, test })
}

/// Vocabulary covering question words and column headers.
pub fn tll_vocab() -> Vocab {
    let mut words: Vec<&str> = vec![
        "which", "have", "won", "equal", "to", "exactly", "less", "fewer", "greater", "more",
        "than", "the", "highest", "lowest", "maximal", "minimal", "?",
    ];
    words.extend(ENTITY_KINDS);
    for p in PROPERTIES {
        words.extend(p.split_whitespace());
    }
    Vocab::build(words)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn fifty_entities_ship_with_the_crate() {
        assert_eq!(entity_names().len(), 50);
    }

    #[test]
    fn tables_have_the_declared_shape() {
        let ds = gen_tll(5, 3, 1).unwrap();
        for s in ds.train.iter().chain(&ds.test) {
            assert_eq!(s.table.entities.len(), TABLE_ROWS);
            assert_eq!(s.table.headers.len(), NUMERIC_COLUMNS);
            assert_eq!(s.table.cells.len(), TABLE_ROWS * NUMERIC_COLUMNS);
            assert_eq!(s.answer.len(), TABLE_ROWS);
        }
    }

    #[test]
    fn train_and_test_value_ranges_are_disjoint() {
        let ds = gen_tll(30, 30, 2).unwrap();
        let train_max = ds
            .train
            .iter()
            .flat_map(|s| s.table.cells.iter())
            .fold(f64::MIN, |a, &b| a.max(b));
        let test_min = ds
            .test
            .iter()
            .flat_map(|s| s.table.cells.iter())
            .fold(f64::MAX, |a, &b| a.min(b));
        assert!(train_max <= 100.0);
        assert!(test_min >= 300.0);
    }

    #[test]
    fn answers_match_an_independent_reimplementation() {
        // 500 sampled questions against a from-scratch evaluation loop.
        let ds = gen_tll(400, 100, 3).unwrap();
        for s in ds.train.iter().chain(&ds.test) {
            let col = s.table.column(s.gold_column);
            let expected: Vec<bool> = match s.gold_op {
                TableOp::EqualTo => col.iter().map(|&v| v == s.gold_scalar.unwrap()).collect(),
                TableOp::LessThan => col.iter().map(|&v| v < s.gold_scalar.unwrap()).collect(),
                TableOp::GreaterThan => {
                    col.iter().map(|&v| v > s.gold_scalar.unwrap()).collect()
                }
                TableOp::Max => {
                    let m = col.iter().cloned().fold(f64::MIN, f64::max);
                    col.iter().map(|&v| v == m).collect()
                }
                TableOp::Min => {
                    let m = col.iter().cloned().fold(f64::MAX, f64::min);
                    col.iter().map(|&v| v == m).collect()
                }
            };
            assert_eq!(s.answer, expected, "question {:?}", s.question);
        }
    }

    #[test]
    fn medal_style_question_selects_matching_rows() {
        let ds = gen_tll(200, 1, 4).unwrap();
        let s = ds
            .train
            .iter()
            .find(|s| s.gold_op == TableOp::GreaterThan)
            .unwrap();
        let col = s.table.column(s.gold_column);
        for (i, &selected) in s.answer.iter().enumerate() {
            assert_eq!(selected, col[i] > s.gold_scalar.unwrap());
        }
        let names = s.answer_names();
        assert_eq!(names.len(), s.answer.iter().filter(|&&b| b).count());
    }

    #[test]
    fn scalar_token_points_at_the_argument() {
        let ds = gen_tll(100, 0, 5).unwrap();
        for s in &ds.train {
            match (s.gold_scalar, s.gold_scalar_token) {
                (Some(v), Some(idx)) => {
                    let tok = s.question.split_whitespace().nth(idx).unwrap();
                    assert_eq!(tok.parse::<f64>().unwrap(), v);
                }
                (None, None) => assert!(!s.gold_op.needs_scalar()),
                other => panic!("inconsistent scalar fields {other:?}"),
            }
        }
    }

    #[test]
    fn generation_is_deterministic() {
        let a = gen_tll(20, 5, 9).unwrap();
        let b = gen_tll(20, 5, 9).unwrap();
        for (x, y) in a.train.iter().zip(&b.train) {
            assert_eq!(x.question, y.question);
            assert_eq!(x.table, y.table);
            assert_eq!(x.answer, y.answer);
        }
    }
}
