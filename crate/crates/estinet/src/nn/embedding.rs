use rand::Rng;

use crate::autodiff::graph::{Graph, Var};
use crate::autodiff::params::{glorot, Bound, ParamSet};
use crate::autodiff::scalar::Scalar;
use crate::autodiff::AdError;

/// Learned piece-embedding table. A token's vector is the arithmetic mean of
/// its piece embeddings; unknown pieces map to a learned row reserved at
/// index 0 by the tokenizer.
#[derive(Debug, Clone)]
pub struct EmbeddingTable {
    table: usize,
    pub vocab_size: usize,
    pub dim: usize,
}

impl EmbeddingTable {
    pub fn new<F: Scalar, R: Rng>(
        params: &mut ParamSet<F>,
        rng: &mut R,
        name: &str,
        vocab_size: usize,
        dim: usize,
    ) -> Self {
        let table = params.register(name, glorot(rng, vec![vocab_size, dim]));
        EmbeddingTable { table, vocab_size, dim }
    }

    /// One output row per token: the mean of that token's piece embeddings.
    pub fn token_vectors<F: Scalar>(
        &self,
        g: &mut Graph<F>,
        bound: &Bound,
        piece_ids_per_token: Vec<Vec<usize>>,
    ) -> Result<Var, AdError> {
        g.embed_mean(bound.var(self.table), piece_ids_per_token)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::autodiff::Tensor;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn table_with(values: Vec<f64>, rows: usize, dim: usize) -> (ParamSet<f64>, EmbeddingTable) {
        let mut ps = ParamSet::new();
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let emb = EmbeddingTable::new(&mut ps, &mut rng, "emb", rows, dim);
        *ps.tensor_mut(0) = Tensor::new(vec![rows, dim], values).unwrap().with_grad();
        (ps, emb)
    }

    #[test]
    fn single_piece_token_is_its_embedding() {
        let (ps, emb) = table_with(vec![1.0, 2.0, 3.0, 4.0], 2, 2);
        let mut g = Graph::new();
        let b = ps.bind(&mut g);
        let v = emb.token_vectors(&mut g, &b, vec![vec![1]]).unwrap();
        assert_eq!(g.values(v), &[3.0, 4.0]);
    }

    #[test]
    fn repeated_piece_averages_to_itself() {
        let (ps, emb) = table_with(vec![1.0, 2.0, 3.0, 4.0], 2, 2);
        let mut g = Graph::new();
        let b = ps.bind(&mut g);
        let v = emb.token_vectors(&mut g, &b, vec![vec![0, 0]]).unwrap();
        assert_eq!(g.values(v), &[1.0, 2.0]);
    }

    #[test]
    fn mean_of_orthogonal_unit_vectors_has_half_sqrt2_norm() {
        let (ps, emb) = table_with(vec![1.0, 0.0, 0.0, 1.0], 2, 2);
        let mut g = Graph::new();
        let b = ps.bind(&mut g);
        let v = emb.token_vectors(&mut g, &b, vec![vec![0, 1]]).unwrap();
        let norm: f64 = g.values(v).iter().map(|x| x * x).sum::<f64>().sqrt();
        assert!((norm - std::f64::consts::SQRT_2 / 2.0).abs() < 1e-12);
    }

    #[test]
    fn empty_group_is_rejected() {
        let (ps, emb) = table_with(vec![0.0; 4], 2, 2);
        let mut g = Graph::new();
        let b = ps.bind(&mut g);
        assert!(emb.token_vectors(&mut g, &b, vec![vec![]]).is_err());
    }
}
