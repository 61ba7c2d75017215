use rand::Rng;

use crate::autodiff::graph::{Graph, Var};
use crate::autodiff::params::{glorot, zeros, Bound, ParamSet};
use crate::autodiff::scalar::Scalar;
use crate::autodiff::AdError;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Activation {
    Linear,
    Relu,
    Elu,
    Tanh,
    Sigmoid,
    Softmax,
}

pub fn apply_activation<F: Scalar>(g: &mut Graph<F>, x: Var, activation: Activation) -> Var {
    match activation {
        Activation::Linear => x,
        Activation::Relu => g.relu(x),
        Activation::Elu => g.elu(x, F::ONE),
        Activation::Tanh => g.tanh(x),
        Activation::Sigmoid => g.sigmoid(x),
        Activation::Softmax => g.softmax(x),
    }
}

/// Fully-connected layer: `activation(x W + b)`.
#[derive(Debug, Clone)]
pub struct Dense {
    w: usize,
    b: usize,
    pub in_dim: usize,
    pub out_dim: usize,
    pub activation: Activation,
}

impl Dense {
    pub fn new<F: Scalar, R: Rng>(
        params: &mut ParamSet<F>,
        rng: &mut R,
        name: &str,
        in_dim: usize,
        out_dim: usize,
        activation: Activation,
    ) -> Self {
        let w = params.register(&format!("{name}.w"), glorot(rng, vec![in_dim, out_dim]));
        let b = params.register(&format!("{name}.b"), zeros(vec![out_dim]));
        Dense { w, b, in_dim, out_dim, activation }
    }

    /// `x` is `[batch, in_dim]`.
    pub fn forward<F: Scalar>(
        &self,
        g: &mut Graph<F>,
        bound: &Bound,
        x: Var,
    ) -> Result<Var, AdError> {
        let z = g.matmul(x, bound.var(self.w))?;
        let z = g.add(z, bound.var(self.b))?;
        Ok(apply_activation(g, z, self.activation))
    }
}
