use rand::Rng;

use crate::autodiff::graph::{Graph, Var};
use crate::autodiff::params::{glorot, zeros, Bound, ParamSet};
use crate::autodiff::AdError;
use crate::nn::{Activation, Dense};

/// Policy/value network over one digit image: two 5x5 conv layers (10 then
/// 20 filters) with 2x2 max pooling, a 256-wide ELU layer, a 10-way policy
/// head, and a scalar value head for the critic baseline.
#[derive(Debug, Clone)]
pub struct AgentNet {
    conv1_w: usize,
    conv1_b: usize,
    conv2_w: usize,
    conv2_b: usize,
    trunk: Dense,
    policy: Dense,
    value: Dense,
}

impl AgentNet {
    pub fn new<R: Rng>(params: &mut ParamSet<f32>, rng: &mut R) -> Self {
        let conv1_w = params.register("conv1.w", glorot(rng, vec![10, 1, 5, 5]));
        let conv1_b = params.register("conv1.b", zeros(vec![10]));
        let conv2_w = params.register("conv2.w", glorot(rng, vec![20, 10, 5, 5]));
        let conv2_b = params.register("conv2.b", zeros(vec![20]));
        let trunk = Dense::new(params, rng, "trunk", 320, 256, Activation::Elu);
        let policy = Dense::new(params, rng, "policy", 256, 10, Activation::Linear);
        let value = Dense::new(params, rng, "value", 256, 1, Activation::Linear);
        AgentNet { conv1_w, conv1_b, conv2_w, conv2_b, trunk, policy, value }
    }

    /// `images` is `[batch, 1, 28, 28]`; returns policy logits `[batch, 10]`
    /// and state values `[batch]`.
    pub fn forward(
        &self,
        g: &mut Graph<f32>,
        bound: &Bound,
        images: Var,
    ) -> Result<(Var, Var), AdError> {
        let batch = g.shape(images)[0];
        let c1 = g.conv2d(images, bound.var(self.conv1_w), Some(bound.var(self.conv1_b)))?;
        let c1 = g.relu(c1);
        let p1 = g.max_pool2d(c1)?;
        let c2 = g.conv2d(p1, bound.var(self.conv2_w), Some(bound.var(self.conv2_b)))?;
        let c2 = g.relu(c2);
        let p2 = g.max_pool2d(c2)?;
        let flat = g.reshape(p2, vec![batch, 320])?;
        let hidden = self.trunk.forward(g, bound, flat)?;
        let logits = self.policy.forward(g, bound, hidden)?;
        let value = self.value.forward(g, bound, hidden)?;
        let value = g.reshape(value, vec![batch])?;
        Ok((logits, value))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn policy_rows_are_distributions_after_softmax() {
        let mut ps = ParamSet::new();
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let agent = AgentNet::new(&mut ps, &mut rng);
        let mut g = Graph::new();
        let b = ps.bind(&mut g);
        let x = g.constant(vec![2, 1, 28, 28], vec![0.25; 2 * 784]).unwrap();
        let (logits, value) = agent.forward(&mut g, &b, x).unwrap();
        assert_eq!(g.shape(logits), &[2, 10]);
        assert_eq!(g.shape(value), &[2]);
        let probs = g.softmax(logits);
        for row in g.values(probs).chunks(10) {
            let s: f32 = row.iter().sum();
            assert!((s - 1.0).abs() < 1e-5);
        }
    }
}
