//! Whitespace word tokens backed by a tiny closed piece vocabulary. A known
//! word is a single piece; anything else falls back to per-character pieces,
//! and characters outside the vocabulary map to the reserved UNK piece 0.
//! Numeric tokens carry their parsed value and are vectorized by the number
//! encoding instead of embeddings.

use std::collections::BTreeMap;

pub const UNK_PIECE: usize = 0;

#[derive(Debug, Clone)]
pub struct Vocab {
    piece_ids: BTreeMap<String, usize>,
    size: usize,
}

impl Vocab {
    /// Index 0 is reserved for UNK; words then chars follow in sorted order.
    pub fn build<'a>(words: impl IntoIterator<Item = &'a str>) -> Self {
        let mut pieces: Vec<String> = words
            .into_iter()
            .flat_map(|w| {
                let lower = w.to_lowercase();
                let chars: Vec<String> = lower.chars().map(|c| c.to_string()).collect();
                std::iter::once(lower).chain(chars)
            })
            .collect();
        pieces.sort();
        pieces.dedup();
        let mut piece_ids = BTreeMap::new();
        for (i, p) in pieces.into_iter().enumerate() {
            piece_ids.insert(p, i + 1);
        }
        let size = piece_ids.len() + 1;
        Vocab { piece_ids, size }
    }

    pub fn size(&self) -> usize {
        self.size
    }

    /// Piece ids for one word token.
    pub fn pieces(&self, word: &str) -> Vec<usize> {
        let lower = word.to_lowercase();
        if let Some(&id) = self.piece_ids.get(&lower) {
            return vec![id];
        }
        lower
            .chars()
            .map(|c| {
                self.piece_ids
                    .get(&c.to_string())
                    .copied()
                    .unwrap_or(UNK_PIECE)
            })
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Token {
    pub text: String,
    /// Parsed value when the token is a number literal.
    pub numeric: Option<f32>,
}

pub fn tokenize(text: &str) -> Vec<Token> {
    text.split_whitespace()
        .map(|w| Token { text: w.to_string(), numeric: w.parse::<f32>().ok().filter(|v| v.is_finite()) })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn known_word_is_one_piece() {
        let v = Vocab::build(["bigger", "than"]);
        assert_eq!(v.pieces("bigger").len(), 1);
        assert_eq!(v.pieces("Bigger"), v.pieces("bigger"));
    }

    #[test]
    fn unknown_word_falls_back_to_characters() {
        let v = Vocab::build(["abc"]);
        let pieces = v.pieces("cab");
        assert_eq!(pieces.len(), 3);
        assert!(pieces.iter().all(|&p| p != UNK_PIECE));
        // 'z' is not in the vocabulary at all.
        assert_eq!(v.pieces("z"), vec![UNK_PIECE]);
    }

    #[test]
    fn numeric_tokens_carry_their_value() {
        let toks = tokenize("is 7.5 greater than 8.2 ?");
        assert_eq!(toks.len(), 6);
        assert_eq!(toks[1].numeric, Some(7.5));
        assert_eq!(toks[4].numeric, Some(8.2));
        assert_eq!(toks[0].numeric, None);
        let weird = tokenize("NaN inf");
        assert_eq!(weird[0].numeric, None);
        assert_eq!(weird[1].numeric, None);
    }
}
