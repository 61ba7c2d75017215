//! Question generator for two-float comparisons. Ten textual templates, all
//! true/false; floats come from a zero-mean normal with variance 1e10.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::blackbox::{bb_compare, CompareOp};

use super::tokenizer::{tokenize, Token, Vocab};
use super::DataError;

/// `{a}` is always the comparison's first argument, `{b}` the second;
/// surface order varies by template.
struct Template {
    text: &'static str,
    op: CompareOp,
}

const TEMPLATES: [Template; 10] = [
    Template { text: "Out of {a} and {b} , is the first bigger ?", op: CompareOp::GreaterThan },
    Template { text: "is {a} greater than {b} ?", op: CompareOp::GreaterThan },
    Template { text: "is {a} bigger than {b} ?", op: CompareOp::GreaterThan },
    Template { text: "is {a} less than {b} ?", op: CompareOp::LessThan },
    Template { text: "is {a} smaller than {b} ?", op: CompareOp::LessThan },
    Template { text: "Out of {a} and {b} , is the first smaller ?", op: CompareOp::LessThan },
    Template { text: "does {a} exceed {b} ?", op: CompareOp::GreaterThan },
    Template { text: "is the number {a} above {b} ?", op: CompareOp::GreaterThan },
    Template { text: "is the number {a} below {b} ?", op: CompareOp::LessThan },
    Template { text: "compared to {b} , is {a} larger ?", op: CompareOp::GreaterThan },
];

#[derive(Debug, Clone, serde::Serialize, serde::Deserialize)]
pub struct TextLogicSample {
    pub question: String,
    /// First comparison argument and its token position.
    pub x: f32,
    pub x_token: usize,
    /// Second comparison argument and its token position.
    pub y: f32,
    pub y_token: usize,
    pub op: CompareOp,
    pub label: bool,
}

/// Token stream of one question plus per-token piece ids; the model input.
#[derive(Debug, Clone)]
pub struct EncodedQuestion {
    pub tokens: Vec<Token>,
    pub piece_ids: Vec<Vec<usize>>,
}

fn gaussian(rng: &mut ChaCha8Rng, std: f64) -> f64 {
    let u1: f64 = rng.random_range(f64::EPSILON..1.0);
    let u2: f64 = rng.random_range(0.0..1.0);
    (-2.0 * u1.ln()).sqrt() * (2.0 * std::f64::consts::PI * u2).cos() * std
}

fn build_sample(template: &Template, a: f32, b: f32) -> TextLogicSample {
    let question = template
        .text
        .replace("{a}", &format!("{a}"))
        .replace("{b}", &format!("{b}"));
    let tokens = tokenize(&question);
    // Locate the two numeric tokens and map them back to the a/b roles.
    let numeric_positions: Vec<usize> = tokens
        .iter()
        .enumerate()
        .filter(|(_, t)| t.numeric.is_some())
        .map(|(i, _)| i)
        .collect();
    debug_assert_eq!(numeric_positions.len(), 2);
    let a_first = template.text.find("{a}").unwrap() < template.text.find("{b}").unwrap();
    let (x_token, y_token) = if a_first {
        (numeric_positions[0], numeric_positions[1])
    } else {
        (numeric_positions[1], numeric_positions[0])
    };
    let label = bb_compare(a as f64, b as f64, template.op).unwrap();
    TextLogicSample { question, x: a, x_token, y: b, y_token, op: template.op, label }
}

/// Deterministic dataset of `n` questions. `split` salts the stream so the
/// train and test sets never share samples.
pub fn gen_text_logic(n: usize, seed: u64, split: &str) -> Result<Vec<TextLogicSample>, DataError> {
    if n == 0 {
        return Err(DataError::Invalid("dataset size must be positive".into()));
    }
    let mut hash: u64 = 0xcbf29ce484222325;
    for b in split.bytes() {
        hash ^= b as u64;
        hash = hash.wrapping_mul(0x100000001b3);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ hash);
    let std = (1e10f64).sqrt();
    Ok((0..n)
        .map(|_| {
            let t = &TEMPLATES[rng.random_range(0..TEMPLATES.len())];
            // Rendering through the shortest-roundtrip decimal keeps the
            // question text and the gold argument bit-identical.
            let a = gaussian(&mut rng, std) as f32;
            let b = gaussian(&mut rng, std) as f32;
            build_sample(t, a, b)
        })
        .collect())
}

/// The vocabulary covering every template word.
pub fn text_logic_vocab() -> Vocab {
    let words: Vec<&str> = TEMPLATES
        .iter()
        .flat_map(|t| t.text.split_whitespace())
        .filter(|w| !w.starts_with('{'))
        .collect();
    Vocab::build(words)
}

/// Tokenize and attach piece ids; a valid question carries exactly two
/// numeric tokens.
pub fn encode_text_logic_input(
    question: &str,
    vocab: &Vocab,
) -> Result<EncodedQuestion, DataError> {
    let tokens = tokenize(question);
    let numeric = tokens.iter().filter(|t| t.numeric.is_some()).count();
    if numeric != 2 {
        return Err(DataError::Invalid(format!(
            "expected exactly 2 numeric tokens, found {numeric} in {question:?}"
        )));
    }
    let piece_ids = tokens.iter().map(|t| vocab.pieces(&t.text)).collect();
    Ok(EncodedQuestion { tokens, piece_ids })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn paper_example_is_false() {
        // "is 7.5 greater than 8.2?" -> false
        let s = build_sample(&TEMPLATES[1], 7.5, 8.2);
        assert!(!s.label);
        assert_eq!(s.question, "is 7.5 greater than 8.2 ?");
    }

    #[test]
    fn equal_pair_is_false_under_both_operators() {
        for t in &TEMPLATES {
            let s = build_sample(t, 3.25, 3.25);
            assert!(!s.label, "template {:?}", t.text);
        }
    }

    #[test]
    fn labels_match_comparison_oracle_on_1000_samples() {
        let data = gen_text_logic(1000, 7, "train").unwrap();
        for s in &data {
            let expected = match s.op {
                CompareOp::GreaterThan => s.x > s.y,
                CompareOp::LessThan => s.x < s.y,
            };
            assert_eq!(s.label, expected);
        }
    }

    #[test]
    fn gold_token_positions_point_at_the_arguments() {
        let data = gen_text_logic(200, 3, "train").unwrap();
        for s in &data {
            let toks = tokenize(&s.question);
            assert_eq!(toks[s.x_token].numeric, Some(s.x));
            assert_eq!(toks[s.y_token].numeric, Some(s.y));
        }
    }

    #[test]
    fn generation_is_pure_and_split_sensitive() {
        let a = gen_text_logic(50, 11, "train").unwrap();
        let b = gen_text_logic(50, 11, "train").unwrap();
        let c = gen_text_logic(50, 11, "test").unwrap();
        assert_eq!(
            a.iter().map(|s| &s.question).collect::<Vec<_>>(),
            b.iter().map(|s| &s.question).collect::<Vec<_>>()
        );
        assert_ne!(
            a.iter().map(|s| &s.question).collect::<Vec<_>>(),
            c.iter().map(|s| &s.question).collect::<Vec<_>>()
        );
        assert!(gen_text_logic(0, 1, "train").is_err());
    }

    #[test]
    fn encoding_requires_two_numbers() {
        let vocab = text_logic_vocab();
        let enc = encode_text_logic_input("is 7.5 greater than 8.2 ?", &vocab).unwrap();
        assert_eq!(enc.tokens.len(), 6);
        assert_eq!(enc.piece_ids.len(), 6);
        assert!(encode_text_logic_input("is 7.5 greater ?", &vocab).is_err());
    }

    #[test]
    fn numeric_questions_roundtrip_through_the_encoding() {
        use crate::tasks::number_encoding::{decode_number, encode_number};
        let data = gen_text_logic(100, 13, "roundtrip").unwrap();
        for s in &data {
            let v = encode_number(s.x, 3, 128).unwrap();
            assert_eq!(decode_number(&v, 3, 128).unwrap().to_bits(), s.x.to_bits());
        }
    }
}
