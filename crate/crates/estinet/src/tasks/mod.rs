//! Deterministic generators and loaders for the four experiments. Generators
//! are pure functions of their parameters and seed; every label they emit is
//! re-derivable from hidden gold structure through the registry functions.

pub mod digits;
pub mod image_seq;
pub mod mnist;
pub mod number_encoding;
pub mod text_logic;
pub mod tll;
pub mod tokenizer;

pub use digits::generate_digit_corpus;
pub use image_seq::{gen_image_addition, gen_image_lookup, ImageSequenceDataset};
pub use mnist::{load_mnist_idx, write_mnist_idx, MnistData};
pub use number_encoding::{decode_number, encode_number};
pub use text_logic::{gen_text_logic, TextLogicSample};
pub use tll::{gen_tll, TllDataset, TllSample};
pub use tokenizer::{tokenize, Token, Vocab};

use thiserror::Error;

#[derive(Debug, Error)]
pub enum DataError {
    #[error("bad magic number: expected {expected}, found {found}")]
    BadMagic { expected: u32, found: u32 },
    #[error("truncated file while reading {0}")]
    Truncated(String),
    #[error("image/label count mismatch: {images} images, {labels} labels")]
    CountMismatch { images: usize, labels: usize },
    #[error("{0}")]
    Invalid(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}
