use rand::Rng;

use crate::autodiff::graph::{Graph, Var};
use crate::autodiff::params::{glorot, zeros, Bound, ParamSet};
use crate::autodiff::scalar::Scalar;
use crate::autodiff::AdError;

/// One encoder block: multi-head self-attention with residual + layer norm,
/// then a position-wise two-layer feed-forward with residual + layer norm.
#[derive(Debug, Clone)]
struct EncoderLayer {
    wq: usize,
    bq: usize,
    wk: usize,
    bk: usize,
    wv: usize,
    bv: usize,
    wo: usize,
    bo: usize,
    ff1_w: usize,
    ff1_b: usize,
    ff2_w: usize,
    ff2_b: usize,
    ln1_g: usize,
    ln1_b: usize,
    ln2_g: usize,
    ln2_b: usize,
}

#[derive(Debug, Clone)]
pub struct TransformerEncoder {
    layers: Vec<EncoderLayer>,
    pub width: usize,
    pub heads: usize,
    pub ff_width: usize,
}

impl TransformerEncoder {
    pub fn new<F: Scalar, R: Rng>(
        params: &mut ParamSet<F>,
        rng: &mut R,
        name: &str,
        n_layers: usize,
        width: usize,
        heads: usize,
        ff_width: usize,
    ) -> Result<Self, AdError> {
        if width % heads != 0 {
            return Err(AdError::Invalid(format!(
                "model width {width} not divisible by {heads} heads"
            )));
        }
        let mut layers = Vec::with_capacity(n_layers);
        for l in 0..n_layers {
            let p = |suffix: &str| format!("{name}.{l}.{suffix}");
            let mut ones = zeros::<F>(vec![width]);
            ones.values.iter_mut().for_each(|v| *v = F::ONE);
            layers.push(EncoderLayer {
                wq: params.register(&p("wq"), glorot(rng, vec![width, width])),
                bq: params.register(&p("bq"), zeros(vec![width])),
                wk: params.register(&p("wk"), glorot(rng, vec![width, width])),
                bk: params.register(&p("bk"), zeros(vec![width])),
                wv: params.register(&p("wv"), glorot(rng, vec![width, width])),
                bv: params.register(&p("bv"), zeros(vec![width])),
                wo: params.register(&p("wo"), glorot(rng, vec![width, width])),
                bo: params.register(&p("bo"), zeros(vec![width])),
                ff1_w: params.register(&p("ff1.w"), glorot(rng, vec![width, ff_width])),
                ff1_b: params.register(&p("ff1.b"), zeros(vec![ff_width])),
                ff2_w: params.register(&p("ff2.w"), glorot(rng, vec![ff_width, width])),
                ff2_b: params.register(&p("ff2.b"), zeros(vec![width])),
                ln1_g: params.register(&p("ln1.g"), ones.clone()),
                ln1_b: params.register(&p("ln1.b"), zeros(vec![width])),
                ln2_g: params.register(&p("ln2.g"), ones),
                ln2_b: params.register(&p("ln2.b"), zeros(vec![width])),
            });
        }
        Ok(TransformerEncoder { layers, width, heads, ff_width })
    }

    /// Encode a `[seq, width]` sequence; shape is preserved.
    pub fn forward<F: Scalar>(
        &self,
        g: &mut Graph<F>,
        bound: &Bound,
        seq: Var,
    ) -> Result<Var, AdError> {
        Ok(self.forward_with_attention(g, bound, seq)?.0)
    }

    /// As [`Self::forward`], also returning each layer's per-head attention
    /// weight matrices (query rows sum to one).
    pub fn forward_with_attention<F: Scalar>(
        &self,
        g: &mut Graph<F>,
        bound: &Bound,
        seq: Var,
    ) -> Result<(Var, Vec<Var>), AdError> {
        let shape = g.shape(seq);
        if shape.len() != 2 || shape[1] != self.width {
            return Err(AdError::BadShape(format!(
                "expected [seq, {}], got {shape:?}",
                self.width
            )));
        }
        let n = shape[0];
        let head_dim = self.width / self.heads;
        let scale = F::from_f64(1.0 / (head_dim as f64).sqrt());
        let mut x = seq;
        let mut attentions = Vec::new();
        for layer in &self.layers {
            let q = g.matmul(x, bound.var(layer.wq))?;
            let q = g.add(q, bound.var(layer.bq))?;
            let k = g.matmul(x, bound.var(layer.wk))?;
            let k = g.add(k, bound.var(layer.bk))?;
            let v = g.matmul(x, bound.var(layer.wv))?;
            let v = g.add(v, bound.var(layer.bv))?;
            let mut head_outputs = Vec::with_capacity(self.heads);
            for h in 0..self.heads {
                let qh = g.slice(q, 1, h * head_dim, head_dim)?;
                let kh = g.slice(k, 1, h * head_dim, head_dim)?;
                let vh = g.slice(v, 1, h * head_dim, head_dim)?;
                let kt = g.transpose2d(kh)?;
                let scores = g.matmul(qh, kt)?;
                let scores = g.mul_scalar(scores, scale);
                let weights = g.softmax(scores);
                attentions.push(weights);
                head_outputs.push(g.matmul(weights, vh)?);
            }
            let merged = g.concat(&head_outputs, 1)?;
            let projected = g.matmul(merged, bound.var(layer.wo))?;
            let projected = g.add(projected, bound.var(layer.bo))?;
            let res1 = g.add(x, projected)?;
            let normed1 = g.layer_norm(
                res1,
                bound.var(layer.ln1_g),
                bound.var(layer.ln1_b),
                F::from_f64(1e-5),
            )?;
            let ff = g.matmul(normed1, bound.var(layer.ff1_w))?;
            let ff = g.add(ff, bound.var(layer.ff1_b))?;
            let ff = g.relu(ff);
            let ff = g.matmul(ff, bound.var(layer.ff2_w))?;
            let ff = g.add(ff, bound.var(layer.ff2_b))?;
            let res2 = g.add(normed1, ff)?;
            x = g.layer_norm(
                res2,
                bound.var(layer.ln2_g),
                bound.var(layer.ln2_b),
                F::from_f64(1e-5),
            )?;
            debug_assert_eq!(g.shape(x), &[n, self.width]);
        }
        Ok((x, attentions))
    }
}

/// The attention sub-computation in isolation (pre-residual): softmax-scaled
/// scores applied to the value projection. Used by tests pinning the
/// single-position special case.
pub fn attention_only<F: Scalar>(
    g: &mut Graph<F>,
    q: Var,
    k: Var,
    v: Var,
) -> Result<(Var, Var), AdError> {
    let head_dim = g.shape(q)[1];
    let kt = g.transpose2d(k)?;
    let scores = g.matmul(q, kt)?;
    let scores = g.mul_scalar(scores, F::from_f64(1.0 / (head_dim as f64).sqrt()));
    let weights = g.softmax(scores);
    let out = g.matmul(weights, v)?;
    Ok((out, weights))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn small_encoder() -> (ParamSet<f64>, TransformerEncoder) {
        let mut ps = ParamSet::new();
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let enc = TransformerEncoder::new(&mut ps, &mut rng, "enc", 2, 8, 2, 16).unwrap();
        (ps, enc)
    }

    #[test]
    fn output_shape_equals_input_shape() {
        let (ps, enc) = small_encoder();
        let mut g = Graph::new();
        let b = ps.bind(&mut g);
        let x_vals: Vec<f64> = (0..5 * 8).map(|i| (i as f64 * 0.37).sin()).collect();
        let x = g.constant(vec![5, 8], x_vals).unwrap();
        let y = enc.forward(&mut g, &b, x).unwrap();
        assert_eq!(g.shape(y), &[5, 8]);
    }

    #[test]
    fn attention_rows_sum_to_one() {
        let (ps, enc) = small_encoder();
        let mut g = Graph::new();
        let b = ps.bind(&mut g);
        let x_vals: Vec<f64> = (0..4 * 8).map(|i| (i as f64 * 0.21).cos()).collect();
        let x = g.constant(vec![4, 8], x_vals).unwrap();
        let (_, attns) = enc.forward_with_attention(&mut g, &b, x).unwrap();
        assert_eq!(attns.len(), 2 * 2); // layers x heads
        for a in attns {
            for row in g.values(a).chunks(4) {
                let s: f64 = row.iter().sum();
                assert!((s - 1.0).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn width_head_mismatch_is_rejected() {
        let mut ps = ParamSet::<f64>::new();
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        assert!(TransformerEncoder::new(&mut ps, &mut rng, "enc", 1, 10, 3, 16).is_err());
    }

    #[test]
    fn single_position_attention_is_value_projection() {
        // With one query/key position the softmax weight is exactly 1, so
        // the attention output is the value row itself.
        let mut g = Graph::<f64>::new();
        let q = g.constant(vec![1, 4], vec![0.3, -0.8, 0.1, 0.9]).unwrap();
        let k = g.constant(vec![1, 4], vec![1.0, 0.5, -0.2, 0.0]).unwrap();
        let v = g.constant(vec![1, 4], vec![7.0, -3.0, 2.5, 0.125]).unwrap();
        let (out, weights) = attention_only(&mut g, q, k, v).unwrap();
        assert_eq!(g.values(weights), &[1.0]);
        assert_eq!(g.values(out), g.values(v));
    }
}
