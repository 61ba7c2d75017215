use rand::Rng;

use crate::autodiff::graph::{Graph, Var};
use crate::autodiff::params::{glorot, zeros, Bound, ParamSet};
use crate::autodiff::scalar::Scalar;
use crate::autodiff::AdError;

/// Single-layer LSTM. Gate order inside the packed `[.., 4h]` projections is
/// input, forget, cell, output.
#[derive(Debug, Clone)]
pub struct Lstm {
    w_ih: usize,
    w_hh: usize,
    bias: usize,
    pub input_dim: usize,
    pub hidden_dim: usize,
}

impl Lstm {
    pub fn new<F: Scalar, R: Rng>(
        params: &mut ParamSet<F>,
        rng: &mut R,
        name: &str,
        input_dim: usize,
        hidden_dim: usize,
    ) -> Self {
        let w_ih = params.register(
            &format!("{name}.w_ih"),
            glorot(rng, vec![input_dim, 4 * hidden_dim]),
        );
        let w_hh = params.register(
            &format!("{name}.w_hh"),
            glorot(rng, vec![hidden_dim, 4 * hidden_dim]),
        );
        let bias = params.register(&format!("{name}.bias"), zeros(vec![4 * hidden_dim]));
        Lstm { w_ih, w_hh, bias, input_dim, hidden_dim }
    }

    /// One recurrence step. `x` is `[batch, input_dim]`; `h`, `c` are
    /// `[batch, hidden_dim]`.
    pub fn step<F: Scalar>(
        &self,
        g: &mut Graph<F>,
        bound: &Bound,
        x: Var,
        h: Var,
        c: Var,
    ) -> Result<(Var, Var), AdError> {
        let hd = self.hidden_dim;
        let zx = g.matmul(x, bound.var(self.w_ih))?;
        let zh = g.matmul(h, bound.var(self.w_hh))?;
        let z = g.add(zx, zh)?;
        let z = g.add(z, bound.var(self.bias))?;
        let i_gate = g.slice(z, 1, 0, hd)?;
        let f_gate = g.slice(z, 1, hd, hd)?;
        let g_gate = g.slice(z, 1, 2 * hd, hd)?;
        let o_gate = g.slice(z, 1, 3 * hd, hd)?;
        let i_gate = g.sigmoid(i_gate);
        let f_gate = g.sigmoid(f_gate);
        let g_gate = g.tanh(g_gate);
        let o_gate = g.sigmoid(o_gate);
        let retained = g.mul(f_gate, c)?;
        let written = g.mul(i_gate, g_gate)?;
        let c_next = g.add(retained, written)?;
        let c_act = g.tanh(c_next);
        let h_next = g.mul(o_gate, c_act)?;
        Ok((h_next, c_next))
    }

    /// Run the recurrence over a non-empty sequence of `[batch, input_dim]`
    /// tensors; returns the final hidden state.
    pub fn last_hidden<F: Scalar>(
        &self,
        g: &mut Graph<F>,
        bound: &Bound,
        inputs: &[Var],
    ) -> Result<Var, AdError> {
        let (h, _) = self.run(g, bound, inputs)?;
        Ok(h)
    }

    pub fn run<F: Scalar>(
        &self,
        g: &mut Graph<F>,
        bound: &Bound,
        inputs: &[Var],
    ) -> Result<(Var, Var), AdError> {
        let (states, c) = self.all_hidden(g, bound, inputs)?;
        Ok((*states.last().unwrap(), c))
    }

    /// Every per-step hidden state plus the final cell state.
    pub fn all_hidden<F: Scalar>(
        &self,
        g: &mut Graph<F>,
        bound: &Bound,
        inputs: &[Var],
    ) -> Result<(Vec<Var>, Var), AdError> {
        let first = *inputs
            .first()
            .ok_or_else(|| AdError::Invalid("empty LSTM input sequence".into()))?;
        let batch = g.shape(first)[0];
        let mut h = g.constant(vec![batch, self.hidden_dim], vec![F::ZERO; batch * self.hidden_dim])?;
        let mut c = h;
        let mut states = Vec::with_capacity(inputs.len());
        for &x in inputs {
            let (h_next, c_next) = self.step(g, bound, x, h, c)?;
            h = h_next;
            c = c_next;
            states.push(h);
        }
        Ok((states, c))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::autodiff::Tensor;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn zeroed_lstm(hd: usize, id: usize) -> (ParamSet<f64>, Lstm) {
        let mut ps = ParamSet::new();
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let lstm = Lstm::new(&mut ps, &mut rng, "lstm", id, hd);
        for i in 0..ps.len() {
            let shape = ps.tensor(i).shape.clone();
            *ps.tensor_mut(i) = Tensor::zeros(shape).with_grad();
        }
        (ps, lstm)
    }

    #[test]
    fn zero_weights_zero_input_gives_zero_output() {
        let (ps, lstm) = zeroed_lstm(3, 2);
        let mut g = Graph::new();
        let b = ps.bind(&mut g);
        let x = g.constant(vec![1, 2], vec![0.0, 0.0]).unwrap();
        let h = lstm.last_hidden(&mut g, &b, &[x, x, x]).unwrap();
        assert!(g.values(h).iter().all(|&v| v == 0.0));
    }

    #[test]
    fn single_step_sequence_equals_one_cell_application() {
        let mut ps = ParamSet::<f64>::new();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let lstm = Lstm::new(&mut ps, &mut rng, "lstm", 2, 3);
        let mut g = Graph::new();
        let b = ps.bind(&mut g);
        let x = g.constant(vec![1, 2], vec![0.4, -0.7]).unwrap();
        let seq = lstm.last_hidden(&mut g, &b, &[x]).unwrap();
        let zeros_h = g.constant(vec![1, 3], vec![0.0; 3]).unwrap();
        let (one, _) = lstm.step(&mut g, &b, x, zeros_h, zeros_h).unwrap();
        assert_eq!(g.values(seq), g.values(one));
    }

    #[test]
    fn empty_sequence_is_an_error() {
        let (ps, lstm) = zeroed_lstm(2, 2);
        let mut g = Graph::new();
        let b = ps.bind(&mut g);
        assert!(lstm.last_hidden(&mut g, &b, &[]).is_err());
    }
}
