use rand::Rng;

use super::graph::{Graph, Var};
use super::scalar::Scalar;
use super::tensor::Tensor;

/// A named, ordered collection of trainable tensors. One `ParamSet` holds the
/// argument extractor's parameters, another the estimator's; the two never
/// overlap.
#[derive(Debug, Clone)]
pub struct ParamSet<F: Scalar> {
    params: Vec<(String, Tensor<F>)>,
    frozen: bool,
}

/// Graph handles for one bind of a [`ParamSet`], aligned by index.
#[derive(Debug, Clone)]
pub struct Bound {
    vars: Vec<Var>,
}

impl Bound {
    /// Assemble from raw graph vars, index-aligned with the parameter set
    /// they stand in for. The gradient-check harness uses this to probe
    /// layer parameters as ordinary inputs.
    pub fn from_vars(vars: Vec<Var>) -> Self {
        Bound { vars }
    }

    pub fn var(&self, idx: usize) -> Var {
        self.vars[idx]
    }

    pub fn vars(&self) -> &[Var] {
        &self.vars
    }
}

impl<F: Scalar> Default for ParamSet<F> {
    fn default() -> Self {
        Self::new()
    }
}

impl<F: Scalar> ParamSet<F> {
    pub fn new() -> Self {
        ParamSet { params: Vec::new(), frozen: false }
    }

    /// Register a tensor; returns its index. Indexes are stable.
    pub fn register(&mut self, name: &str, tensor: Tensor<F>) -> usize {
        debug_assert!(
            self.params.iter().all(|(n, _)| n != name),
            "duplicate parameter {name}"
        );
        self.params.push((name.to_string(), tensor.with_grad()));
        self.params.len() - 1
    }

    pub fn len(&self) -> usize {
        self.params.len()
    }

    pub fn is_empty(&self) -> bool {
        self.params.is_empty()
    }

    pub fn numel(&self) -> usize {
        self.params.iter().map(|(_, t)| t.numel()).sum()
    }

    pub fn name(&self, idx: usize) -> &str {
        &self.params[idx].0
    }

    pub fn tensor(&self, idx: usize) -> &Tensor<F> {
        &self.params[idx].1
    }

    pub fn tensor_mut(&mut self, idx: usize) -> &mut Tensor<F> {
        &mut self.params[idx].1
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, &Tensor<F>)> {
        self.params.iter().map(|(n, t)| (n.as_str(), t))
    }

    /// Frozen parameters bind as constants: no gradients accumulate and the
    /// optimizer skips them.
    pub fn set_frozen(&mut self, frozen: bool) {
        self.frozen = frozen;
    }

    pub fn frozen(&self) -> bool {
        self.frozen
    }

    /// Insert every parameter into `graph` as a leaf. The same `Bound` must
    /// be reused for every occurrence within the forward pass so that shared
    /// parameters accumulate into one gradient.
    pub fn bind(&self, graph: &mut Graph<F>) -> Bound {
        let vars = self
            .params
            .iter()
            .map(|(_, t)| {
                if self.frozen {
                    let mut c = t.clone();
                    c.requires_grad = false;
                    graph.leaf(&c)
                } else {
                    graph.leaf(t)
                }
            })
            .collect();
        Bound { vars }
    }

    /// Copy gradients from `graph` into each tensor's accumulator,
    /// overwriting previous contents. Returns the gradient L2 norm.
    pub fn take_grads(&mut self, graph: &Graph<F>, bound: &Bound) -> f64 {
        let mut sq = 0.0f64;
        if self.frozen {
            for (_, t) in &mut self.params {
                t.zero_grad();
            }
            return 0.0;
        }
        for (i, (_, t)) in self.params.iter_mut().enumerate() {
            let g = graph.grad(bound.vars[i]);
            t.zero_grad();
            let acc = t.grad.as_mut().unwrap();
            for (dst, &src) in acc.iter_mut().zip(g) {
                *dst = src;
                sq += src.to_f64() * src.to_f64();
            }
        }
        sq.sqrt()
    }
}

/// Uniform init in [-limit, limit], the Glorot-style fan-based default.
pub fn glorot<F: Scalar, R: Rng>(rng: &mut R, shape: Vec<usize>) -> Tensor<F> {
    let fan_in = if shape.len() >= 2 {
        shape[..shape.len() - 1].iter().product::<usize>()
    } else {
        shape[0]
    };
    let fan_out = *shape.last().unwrap();
    let limit = (6.0 / (fan_in + fan_out) as f64).sqrt();
    let numel: usize = shape.iter().product();
    let values = (0..numel)
        .map(|_| F::from_f64(rng.random_range(-limit..limit)))
        .collect();
    Tensor { shape, values, requires_grad: false, grad: None }
}

pub fn zeros<F: Scalar>(shape: Vec<usize>) -> Tensor<F> {
    Tensor::zeros(shape)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn bind_and_take_grads() {
        let mut ps = ParamSet::<f64>::new();
        let idx = ps.register("w", Tensor::new(vec![2], vec![1.0, 2.0]).unwrap());
        let mut g = Graph::new();
        let b = ps.bind(&mut g);
        let sq = g.square(b.var(idx));
        let loss = g.sum(sq);
        g.backward(loss).unwrap();
        let norm = ps.take_grads(&g, &b);
        assert_eq!(ps.tensor(idx).grad.as_ref().unwrap(), &vec![2.0, 4.0]);
        assert!((norm - (4.0f64 + 16.0).sqrt()).abs() < 1e-12);
    }

    #[test]
    fn frozen_params_accumulate_nothing() {
        let mut ps = ParamSet::<f64>::new();
        let idx = ps.register("w", Tensor::new(vec![1], vec![3.0]).unwrap());
        ps.set_frozen(true);
        let mut g = Graph::new();
        let b = ps.bind(&mut g);
        let sq = g.square(b.var(idx));
        let loss = g.sum(sq);
        g.backward(loss).unwrap();
        let norm = ps.take_grads(&g, &b);
        assert_eq!(norm, 0.0);
        assert_eq!(ps.tensor(idx).grad.as_ref().unwrap(), &vec![0.0]);
    }

    #[test]
    fn glorot_respects_shape_and_seed() {
        let mut r1 = ChaCha8Rng::seed_from_u64(7);
        let mut r2 = ChaCha8Rng::seed_from_u64(7);
        let a: Tensor<f32> = glorot(&mut r1, vec![3, 4]);
        let b: Tensor<f32> = glorot(&mut r2, vec![3, 4]);
        assert_eq!(a.values, b.values);
        assert_eq!(a.numel(), 12);
    }
}
