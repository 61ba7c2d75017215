//! Parameterized layers composed into argument extractors and estimators.
//! Layers hold indexes into a [`ParamSet`] and build their computation on a
//! caller-provided graph, so one layer instance can serve every sequence
//! position with shared parameters.

pub mod attention;
pub mod conv_extractor;
pub mod dense;
pub mod embedding;
pub mod gumbel;
pub mod lstm;
pub mod nalu;
pub mod selector;

pub use attention::TransformerEncoder;
pub use conv_extractor::DigitExtractor;
pub use dense::{apply_activation, Activation, Dense};
pub use embedding::EmbeddingTable;
pub use gumbel::{gumbel_softmax_select, sample_gumbel};
pub use lstm::Lstm;
pub use nalu::Nalu;
pub use selector::SelectorHead;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::autodiff::gradcheck::{rand_tensor, rand_tensor_off_zero, Case};
use crate::autodiff::params::{Bound, ParamSet};
use crate::autodiff::AdError;

/// Declarative layer description; kinds compose only when shapes chain.
#[derive(Debug, Clone, PartialEq)]
pub enum LayerSpec {
    Dense { input: usize, output: usize, activation: Activation },
    Conv2d { filters: usize, kernel: usize },
    MaxPool,
    Lstm { input: usize, hidden: usize },
    Nalu { input: usize, output: usize },
    AttentionEncoder { layers: usize, width: usize, heads: usize, ff_width: usize },
    EmbeddingAverage { vocab: usize, dim: usize },
    Selector { query_dim: usize, class_dim: usize },
}

impl LayerSpec {
    pub fn validate(&self) -> Result<(), AdError> {
        let dims: Vec<usize> = match self {
            LayerSpec::Dense { input, output, .. } => vec![*input, *output],
            LayerSpec::Conv2d { filters, kernel } => vec![*filters, *kernel],
            LayerSpec::MaxPool => vec![],
            LayerSpec::Lstm { input, hidden } => vec![*input, *hidden],
            LayerSpec::Nalu { input, output } => vec![*input, *output],
            LayerSpec::AttentionEncoder { layers, width, heads, ff_width } => {
                if width % heads != 0 {
                    return Err(AdError::Invalid(format!(
                        "attention width {width} not divisible by {heads} heads"
                    )));
                }
                vec![*layers, *width, *heads, *ff_width]
            }
            LayerSpec::EmbeddingAverage { vocab, dim } => vec![*vocab, *dim],
            LayerSpec::Selector { query_dim, class_dim } => vec![*query_dim, *class_dim],
        };
        if dims.iter().any(|&d| d == 0) {
            return Err(AdError::Invalid(format!("{self:?} has a zero dimension")));
        }
        Ok(())
    }

    /// Vector width produced when the layer maps vectors to vectors.
    fn vector_output(&self) -> Option<usize> {
        match self {
            LayerSpec::Dense { output, .. } => Some(*output),
            LayerSpec::Nalu { output, .. } => Some(*output),
            LayerSpec::Lstm { hidden, .. } => Some(*hidden),
            LayerSpec::AttentionEncoder { width, .. } => Some(*width),
            LayerSpec::EmbeddingAverage { dim, .. } => Some(*dim),
            _ => None,
        }
    }

    fn vector_input(&self) -> Option<usize> {
        match self {
            LayerSpec::Dense { input, .. } => Some(*input),
            LayerSpec::Nalu { input, .. } => Some(*input),
            LayerSpec::Lstm { input, .. } => Some(*input),
            LayerSpec::AttentionEncoder { width, .. } => Some(*width),
            LayerSpec::Selector { query_dim, .. } => Some(*query_dim),
            _ => None,
        }
    }
}

/// Check each spec and every adjacent vector-to-vector junction.
pub fn validate_chain(specs: &[LayerSpec]) -> Result<(), AdError> {
    for s in specs {
        s.validate()?;
    }
    for pair in specs.windows(2) {
        if let (Some(out), Some(input)) = (pair[0].vector_output(), pair[1].vector_input()) {
            if out != input {
                return Err(AdError::BadShape(format!(
                    "{:?} emits width {out} but {:?} expects {input}",
                    pair[0], pair[1]
                )));
            }
        }
    }
    Ok(())
}

/// Finite-difference cases covering every layer's backward path, probing
/// parameters and inputs alike.
pub fn layer_cases() -> Vec<Case> {
    let mut cases = Vec::new();

    {
        let mut ps = ParamSet::<f64>::new();
        let mut rng = ChaCha8Rng::seed_from_u64(101);
        let layer = Dense::new(&mut ps, &mut rng, "d", 4, 3, Activation::Tanh);
        let shapes: Vec<Vec<usize>> = ps.iter().map(|(_, t)| t.shape.clone()).collect();
        cases.push(Case::new(
            "layer_dense",
            move |r| {
                let mut v: Vec<_> = shapes
                    .iter()
                    .map(|s| rand_tensor(r, s.clone(), -0.8, 0.8))
                    .collect();
                v.push(rand_tensor(r, vec![2, 4], -1.0, 1.0));
                v
            },
            move |g, v| {
                let bound = Bound::from_vars(v[..2].to_vec());
                layer.forward(g, &bound, v[2])
            },
        ));
    }

    {
        let mut ps = ParamSet::<f64>::new();
        let mut rng = ChaCha8Rng::seed_from_u64(102);
        let layer = Lstm::new(&mut ps, &mut rng, "lstm", 2, 3);
        let shapes: Vec<Vec<usize>> = ps.iter().map(|(_, t)| t.shape.clone()).collect();
        let n = shapes.len();
        cases.push(Case::new(
            "layer_lstm_10_steps",
            move |r| {
                let mut v: Vec<_> = shapes
                    .iter()
                    .map(|s| rand_tensor(r, s.clone(), -0.6, 0.6))
                    .collect();
                for _ in 0..10 {
                    v.push(rand_tensor(r, vec![1, 2], -1.0, 1.0));
                }
                v
            },
            move |g, v| {
                let bound = Bound::from_vars(v[..n].to_vec());
                layer.last_hidden(g, &bound, &v[n..])
            },
        ));
    }

    {
        let mut ps = ParamSet::<f64>::new();
        let mut rng = ChaCha8Rng::seed_from_u64(103);
        let layer = Nalu::new(&mut ps, &mut rng, "nalu", 3, 2);
        let shapes: Vec<Vec<usize>> = ps.iter().map(|(_, t)| t.shape.clone()).collect();
        let n = shapes.len();
        cases.push(Case::new(
            "layer_nalu",
            move |r| {
                let mut v: Vec<_> = shapes
                    .iter()
                    .map(|s| rand_tensor(r, s.clone(), -0.8, 0.8))
                    .collect();
                // |x| has a kink at zero; keep inputs off it.
                v.push(rand_tensor_off_zero(r, vec![2, 3]));
                v
            },
            move |g, v| {
                let bound = Bound::from_vars(v[..n].to_vec());
                layer.forward(g, &bound, v[n])
            },
        ));
    }

    {
        let mut ps = ParamSet::<f64>::new();
        let mut rng = ChaCha8Rng::seed_from_u64(104);
        let enc = TransformerEncoder::new(&mut ps, &mut rng, "enc", 1, 4, 2, 8).unwrap();
        let shapes: Vec<Vec<usize>> = ps.iter().map(|(_, t)| t.shape.clone()).collect();
        let n = shapes.len();
        cases.push(Case::new(
            "layer_transformer_encoder",
            move |r| {
                let mut v: Vec<_> = shapes
                    .iter()
                    .map(|s| rand_tensor(r, s.clone(), -0.5, 0.5))
                    .collect();
                v.push(rand_tensor(r, vec![3, 4], -1.0, 1.0));
                v
            },
            move |g, v| {
                let bound = Bound::from_vars(v[..n].to_vec());
                enc.forward(g, &bound, v[n])
            },
        ));
    }

    {
        let mut ps = ParamSet::<f64>::new();
        let mut rng = ChaCha8Rng::seed_from_u64(105);
        let head = SelectorHead::new(&mut ps, &mut rng, "sel", 3, 4);
        let shapes: Vec<Vec<usize>> = ps.iter().map(|(_, t)| t.shape.clone()).collect();
        let n = shapes.len();
        cases.push(Case::new(
            "layer_selector",
            move |r| {
                let mut v: Vec<_> = shapes
                    .iter()
                    .map(|s| rand_tensor(r, s.clone(), -0.8, 0.8))
                    .collect();
                v.push(rand_tensor(r, vec![1, 3], -1.0, 1.0));
                v.push(rand_tensor(r, vec![5, 4], -1.0, 1.0));
                v
            },
            move |g, v| {
                let bound = Bound::from_vars(v[..n].to_vec());
                let logits = head.logits(g, &bound, v[n], v[n + 1])?;
                Ok(g.softmax(logits))
            },
        ));
    }

    {
        let mut ps = ParamSet::<f64>::new();
        let mut rng = ChaCha8Rng::seed_from_u64(106);
        let emb = EmbeddingTable::new(&mut ps, &mut rng, "emb", 6, 3);
        cases.push(Case::new(
            "layer_embedding_average",
            move |r| vec![rand_tensor(r, vec![6, 3], -1.0, 1.0)],
            move |g, v| {
                let bound = Bound::from_vars(v.to_vec());
                emb.token_vectors(g, &bound, vec![vec![0, 3], vec![5], vec![2, 2, 4]])
            },
        ));
    }

    {
        // Conv stack at reduced spatial size; same op sequence as the digit
        // extractor.
        cases.push(Case::new(
            "layer_conv_pool_stack",
            |r| {
                vec![
                    rand_tensor(r, vec![1, 1, 6, 6], -1.0, 1.0),
                    rand_tensor(r, vec![2, 1, 3, 3], -0.8, 0.8),
                    rand_tensor(r, vec![2], -0.3, 0.3),
                    rand_tensor(r, vec![8, 3], -0.8, 0.8),
                ]
            },
            |g, v| {
                let c = g.conv2d(v[0], v[1], Some(v[2]))?;
                let a = g.tanh(c);
                let p = g.max_pool2d(a)?;
                let flat = g.reshape(p, vec![1, 8])?;
                g.matmul(flat, v[3])
            },
        ));
    }

    cases
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::autodiff::gradcheck::run_suite;

    #[test]
    fn every_layer_passes_finite_difference_check() {
        let report = run_suite(&layer_cases(), 1, 7, None).unwrap();
        for case in &report.cases {
            assert!(
                case.passed,
                "{} failed: max rel err {:.3e}",
                case.name, case.max_relative_error
            );
        }
    }

    #[test]
    fn chain_validation_catches_width_breaks() {
        let good = [
            LayerSpec::Dense { input: 320, output: 10, activation: Activation::Linear },
            LayerSpec::Lstm { input: 10, hidden: 50 },
            LayerSpec::Nalu { input: 50, output: 100 },
        ];
        assert!(validate_chain(&good).is_ok());
        let bad = [
            LayerSpec::Dense { input: 320, output: 10, activation: Activation::Linear },
            LayerSpec::Lstm { input: 11, hidden: 50 },
        ];
        assert!(validate_chain(&bad).is_err());
        assert!(LayerSpec::Dense { input: 0, output: 3, activation: Activation::Linear }
            .validate()
            .is_err());
        assert!(
            LayerSpec::AttentionEncoder { layers: 1, width: 10, heads: 3, ff_width: 8 }
                .validate()
                .is_err()
        );
    }
}
