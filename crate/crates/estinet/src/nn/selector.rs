use rand::Rng;

use crate::autodiff::graph::{Graph, Var};
use crate::autodiff::params::{glorot, zeros, Bound, ParamSet};
use crate::autodiff::scalar::Scalar;
use crate::autodiff::AdError;

/// Classifier over a per-sample class matrix `C` (one row per candidate:
/// tokens of a question, table columns, operations). Scoring a query vector
/// `q` gives logits `beta = C (q W + b)`, one per candidate row, so the same
/// head serves questions of any length.
#[derive(Debug, Clone)]
pub struct SelectorHead {
    w: usize,
    b: usize,
    pub query_dim: usize,
    pub class_dim: usize,
}

impl SelectorHead {
    pub fn new<F: Scalar, R: Rng>(
        params: &mut ParamSet<F>,
        rng: &mut R,
        name: &str,
        query_dim: usize,
        class_dim: usize,
    ) -> Self {
        let w = params.register(&format!("{name}.w"), glorot(rng, vec![query_dim, class_dim]));
        let b = params.register(&format!("{name}.b"), zeros(vec![class_dim]));
        SelectorHead { w, b, query_dim, class_dim }
    }

    /// `query` is `[1, query_dim]`, `class_matrix` is `[c_n, class_dim]`;
    /// returns logits `[1, c_n]`.
    pub fn logits<F: Scalar>(
        &self,
        g: &mut Graph<F>,
        bound: &Bound,
        query: Var,
        class_matrix: Var,
    ) -> Result<Var, AdError> {
        if g.shape(class_matrix).len() != 2 || g.shape(class_matrix)[1] != self.class_dim {
            return Err(AdError::BadShape(format!(
                "class matrix {:?}, expected [c_n, {}]",
                g.shape(class_matrix),
                self.class_dim
            )));
        }
        let projected = g.matmul(query, bound.var(self.w))?;
        let projected = g.add(projected, bound.var(self.b))?;
        let column = g.transpose2d(projected)?;
        let scores = g.matmul(class_matrix, column)?;
        let c_n = g.shape(scores)[0];
        g.reshape(scores, vec![1, c_n])
    }

    /// Softmax over [`Self::logits`]: the soft selection distribution.
    pub fn distribution<F: Scalar>(
        &self,
        g: &mut Graph<F>,
        bound: &Bound,
        query: Var,
        class_matrix: Var,
    ) -> Result<Var, AdError> {
        let logits = self.logits(g, bound, query, class_matrix)?;
        Ok(g.softmax(logits))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn one_logit_per_candidate_row() {
        let mut ps = ParamSet::<f64>::new();
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let head = SelectorHead::new(&mut ps, &mut rng, "sel", 6, 4);
        let mut g = Graph::new();
        let b = ps.bind(&mut g);
        let q_vals: Vec<f64> = (0..6).map(|i| i as f64 * 0.1).collect();
        let q = g.constant(vec![1, 6], q_vals).unwrap();
        let c_vals: Vec<f64> = (0..8 * 4).map(|i| (i as f64).sin()).collect();
        let c = g.constant(vec![8, 4], c_vals).unwrap();
        let logits = head.logits(&mut g, &b, q, c).unwrap();
        assert_eq!(g.shape(logits), &[1, 8]);
        let dist = head.distribution(&mut g, &b, q, c).unwrap();
        let sum: f64 = g.values(dist).iter().sum();
        assert!((sum - 1.0).abs() < 1e-9);
    }

    #[test]
    fn scores_match_hand_computation() {
        let mut ps = ParamSet::<f64>::new();
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let head = SelectorHead::new(&mut ps, &mut rng, "sel", 2, 3);
        let mut g = Graph::new();
        let b = ps.bind(&mut g);
        let q = g.constant(vec![1, 2], vec![0.5, -1.0]).unwrap();
        let c = g
            .constant(vec![2, 3], vec![1.0, 0.0, 2.0, -1.0, 1.0, 0.5])
            .unwrap();
        let logits = head.logits(&mut g, &b, q, c).unwrap();
        let w = &ps.tensor(0).values;
        let bias = &ps.tensor(1).values;
        let mut proj = [0.0f64; 3];
        for (j, p) in proj.iter_mut().enumerate() {
            *p = 0.5 * w[j] - 1.0 * w[3 + j] + bias[j];
        }
        let expected0 = proj[0] + 2.0 * proj[2];
        let expected1 = -proj[0] + proj[1] + 0.5 * proj[2];
        assert!((g.values(logits)[0] - expected0).abs() < 1e-12);
        assert!((g.values(logits)[1] - expected1).abs() < 1e-12);
    }
}
