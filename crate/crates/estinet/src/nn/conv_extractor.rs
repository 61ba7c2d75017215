use rand::Rng;

use crate::autodiff::graph::{Graph, Var};
use crate::autodiff::params::{glorot, zeros, Bound, ParamSet};
use crate::autodiff::scalar::Scalar;
use crate::autodiff::AdError;

use super::dense::{Activation, Dense};

/// Digit classifier for 28x28 grayscale images:
/// conv(10 filters, 5x5) -> pool 2x2 -> conv(20, 5x5) -> pool 2x2 ->
/// dense 320 -> 10. One instance serves every position of an image
/// sequence, so all positions share parameters and gradients.
#[derive(Debug, Clone)]
pub struct DigitExtractor {
    conv1_w: usize,
    conv1_b: usize,
    conv2_w: usize,
    conv2_b: usize,
    head: Dense,
}

pub const FLATTENED_WIDTH: usize = 320; // 20 filters x 4 x 4 after two pools

impl DigitExtractor {
    pub fn new<F: Scalar, R: Rng>(params: &mut ParamSet<F>, rng: &mut R) -> Self {
        let conv1_w = params.register("conv1.w", glorot(rng, vec![10, 1, 5, 5]));
        let conv1_b = params.register("conv1.b", zeros(vec![10]));
        let conv2_w = params.register("conv2.w", glorot(rng, vec![20, 10, 5, 5]));
        let conv2_b = params.register("conv2.b", zeros(vec![20]));
        let head = Dense::new(params, rng, "fc_arg", FLATTENED_WIDTH, 10, Activation::Linear);
        DigitExtractor { conv1_w, conv1_b, conv2_w, conv2_b, head }
    }

    /// `images` is `[batch, 1, 28, 28]` in [0, 1]; returns logits `[batch, 10]`.
    pub fn logits<F: Scalar>(
        &self,
        g: &mut Graph<F>,
        bound: &Bound,
        images: Var,
    ) -> Result<Var, AdError> {
        let shape = g.shape(images);
        if shape.len() != 4 || shape[1] != 1 || shape[2] != 28 || shape[3] != 28 {
            return Err(AdError::BadShape(format!(
                "expected [batch, 1, 28, 28] images, got {shape:?}"
            )));
        }
        let batch = shape[0];
        let c1 = g.conv2d(images, bound.var(self.conv1_w), Some(bound.var(self.conv1_b)))?;
        let c1 = g.relu(c1);
        let p1 = g.max_pool2d(c1)?;
        let c2 = g.conv2d(p1, bound.var(self.conv2_w), Some(bound.var(self.conv2_b)))?;
        let c2 = g.relu(c2);
        let p2 = g.max_pool2d(c2)?;
        let flat = g.reshape(p2, vec![batch, FLATTENED_WIDTH])?;
        self.head.forward(g, bound, flat)
    }

    /// Softmax over [`Self::logits`]: one digit distribution per image.
    pub fn distributions<F: Scalar>(
        &self,
        g: &mut Graph<F>,
        bound: &Bound,
        images: Var,
    ) -> Result<Var, AdError> {
        let logits = self.logits(g, bound, images)?;
        Ok(g.softmax(logits))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn output_is_a_distribution_over_ten_digits() {
        let mut ps = ParamSet::<f32>::new();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let net = DigitExtractor::new(&mut ps, &mut rng);
        let mut g = Graph::new();
        let b = ps.bind(&mut g);
        let pixels: Vec<f32> = (0..2 * 28 * 28).map(|i| (i % 7) as f32 / 7.0).collect();
        let x = g.constant(vec![2, 1, 28, 28], pixels).unwrap();
        let d = net.distributions(&mut g, &b, x).unwrap();
        assert_eq!(g.shape(d), &[2, 10]);
        for row in g.values(d).chunks(10) {
            let sum: f32 = row.iter().sum();
            assert!((sum - 1.0).abs() < 1e-5);
            assert!(row.iter().all(|&p| p >= 0.0));
        }
    }

    #[test]
    fn flattened_width_follows_shape_arithmetic() {
        // 28 -> conv 5x5 -> 24 -> pool -> 12 -> conv 5x5 -> 8 -> pool -> 4.
        assert_eq!(FLATTENED_WIDTH, 20 * 4 * 4);
    }

    #[test]
    fn wrong_input_shape_is_rejected() {
        let mut ps = ParamSet::<f32>::new();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let net = DigitExtractor::new(&mut ps, &mut rng);
        let mut g = Graph::new();
        let b = ps.bind(&mut g);
        let x = g.constant(vec![1, 1, 20, 20], vec![0.0; 400]).unwrap();
        assert!(net.logits(&mut g, &b, x).is_err());
    }

    #[test]
    fn sequence_positions_share_one_gradient_accumulator() {
        let mut ps = ParamSet::<f64>::new();
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let net = DigitExtractor::new(&mut ps, &mut rng);
        let mut g = Graph::new();
        let b = ps.bind(&mut g);
        // Two "positions" of a sequence forwarded separately still reference
        // the identical parameter nodes.
        let xa = g.constant(vec![1, 1, 28, 28], vec![0.3; 784]).unwrap();
        let xb = g.constant(vec![1, 1, 28, 28], vec![0.7; 784]).unwrap();
        let la = net.logits(&mut g, &b, xa).unwrap();
        let lb = net.logits(&mut g, &b, xb).unwrap();
        let sa = g.sum(la);
        let sb = g.sum(lb);

        let both = g.add(sa, sb).unwrap();
        g.backward(both).unwrap();
        let combined: Vec<f64> = g.grad(b.var(0)).to_vec();

        g.backward(sa).unwrap();
        let only_a: Vec<f64> = g.grad(b.var(0)).to_vec();
        g.backward(sb).unwrap();
        let only_b: Vec<f64> = g.grad(b.var(0)).to_vec();

        for i in 0..combined.len() {
            assert!((combined[i] - (only_a[i] + only_b[i])).abs() < 1e-9);
        }
    }
}
