//! Reverse-mode automatic differentiation over dense tensors.
//!
//! A [`Graph`] is an append-only arena of nodes. Forward builders record one
//! node per operation (inputs referenced by [`Var`] id, so topological order
//! is insertion order) and [`Graph::backward`] sweeps the records in reverse.
//! `backward` is idempotent: every call clears all gradients and recomputes
//! them from the given root, so calling it twice yields identical results.

use super::scalar::Scalar;
use super::tensor::{strides, Tensor};
use super::AdError;

/// Handle to a node in a [`Graph`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Var(pub(crate) usize);

#[derive(Debug, Clone)]
enum Op<F: Scalar> {
    Leaf,
    Matmul { a: Var, b: Var },
    Add { a: Var, b: Var },
    /// `a + bias` where `bias` is a vector broadcast over the last axis.
    AddBias { a: Var, bias: Var },
    Sub { a: Var, b: Var },
    Mul { a: Var, b: Var },
    Div { a: Var, b: Var },
    Neg { a: Var },
    Exp { a: Var },
    Log { a: Var },
    Abs { a: Var },
    Relu { a: Var },
    Elu { a: Var, alpha: F },
    Tanh { a: Var },
    Sigmoid { a: Var },
    Square { a: Var },
    AddScalar { a: Var },
    MulScalar { a: Var, c: F },
    Softmax { a: Var },
    LogSoftmax { a: Var },
    Transpose2d { a: Var },
    Reshape { a: Var },
    Slice { a: Var, axis: usize, start: usize },
    Concat { parts: Vec<Var>, axis: usize },
    Sum { a: Var },
    SumLast { a: Var },
    Mean { a: Var },
    MaxPool2d { a: Var, argmax: Vec<usize> },
    Conv2d { x: Var, w: Var, bias: Option<Var> },
    LayerNorm { a: Var, gamma: Var, beta: Var, inv_std: Vec<F>, normed: Vec<F> },
    EmbedMean { table: Var, groups: Vec<Vec<usize>> },
    GumbelSoftmax { logits: Var, soft: Vec<F>, inv_tau: F },
    StraightThrough { a: Var },
}

struct Node<F: Scalar> {
    shape: Vec<usize>,
    values: Vec<F>,
    op: Op<F>,
    needs_grad: bool,
}

/// Computation graph: ordered operation records plus their cached values.
pub struct Graph<F: Scalar> {
    nodes: Vec<Node<F>>,
    grads: Vec<Vec<F>>,
}

impl<F: Scalar> Default for Graph<F> {
    fn default() -> Self {
        Self::new()
    }
}

impl<F: Scalar> Graph<F> {
    pub fn new() -> Self {
        Graph { nodes: Vec::new(), grads: Vec::new() }
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn values(&self, v: Var) -> &[F] {
        &self.nodes[v.0].values
    }

    pub fn shape(&self, v: Var) -> &[usize] {
        &self.nodes[v.0].shape
    }

    pub fn numel(&self, v: Var) -> usize {
        self.nodes[v.0].values.len()
    }

    /// Gradient of the last `backward` root with respect to `v`.
    /// Zero for nodes the root does not reach.
    pub fn grad(&self, v: Var) -> &[F] {
        &self.grads[v.0]
    }

    pub fn needs_grad(&self, v: Var) -> bool {
        self.nodes[v.0].needs_grad
    }

    fn push(&mut self, shape: Vec<usize>, values: Vec<F>, op: Op<F>, needs_grad: bool) -> Var {
        debug_assert_eq!(shape.iter().product::<usize>(), values.len());
        self.nodes.push(Node { shape, values, op, needs_grad });
        Var(self.nodes.len() - 1)
    }

    /// Insert a constant (no gradient tracking).
    pub fn constant(&mut self, shape: Vec<usize>, values: Vec<F>) -> Result<Var, AdError> {
        if shape.iter().product::<usize>() != values.len() {
            return Err(AdError::BadShape(format!(
                "{} values do not fill {shape:?}",
                values.len()
            )));
        }
        Ok(self.push(shape, values, Op::Leaf, false))
    }

    pub fn scalar(&mut self, v: F) -> Var {
        self.push(vec![1], vec![v], Op::Leaf, false)
    }

    /// Insert a leaf node from a host tensor. Gradients are accumulated for
    /// it iff `tensor.requires_grad`.
    pub fn leaf(&mut self, tensor: &Tensor<F>) -> Var {
        self.push(
            tensor.shape.clone(),
            tensor.values.clone(),
            Op::Leaf,
            tensor.requires_grad,
        )
    }

    // ---- elementwise ----

    fn unary(&mut self, a: Var, op: Op<F>, f: impl Fn(F) -> F) -> Var {
        let values = self.nodes[a.0].values.iter().map(|&x| f(x)).collect();
        let shape = self.nodes[a.0].shape.clone();
        let ng = self.nodes[a.0].needs_grad;
        self.push(shape, values, op, ng)
    }

    fn binary_same_shape(
        &mut self,
        a: Var,
        b: Var,
        name: &str,
        op: Op<F>,
        f: impl Fn(F, F) -> F,
    ) -> Result<Var, AdError> {
        if self.nodes[a.0].shape != self.nodes[b.0].shape {
            return Err(AdError::BadShape(format!(
                "{name}: {:?} vs {:?}",
                self.nodes[a.0].shape, self.nodes[b.0].shape
            )));
        }
        let values = self.nodes[a.0]
            .values
            .iter()
            .zip(&self.nodes[b.0].values)
            .map(|(&x, &y)| f(x, y))
            .collect();
        let shape = self.nodes[a.0].shape.clone();
        let ng = self.nodes[a.0].needs_grad || self.nodes[b.0].needs_grad;
        Ok(self.push(shape, values, op, ng))
    }

    /// Elementwise addition. Also accepts a 1-D `b` matching the last axis of
    /// `a` (bias broadcast), the only broadcast form supported.
    pub fn add(&mut self, a: Var, b: Var) -> Result<Var, AdError> {
        let (sa, sb) = (&self.nodes[a.0].shape, &self.nodes[b.0].shape);
        if sa != sb && sb.len() == 1 && sa.last() == Some(&sb[0]) {
            let m = sb[0];
            let bias = &self.nodes[b.0].values;
            let values = self.nodes[a.0]
                .values
                .iter()
                .enumerate()
                .map(|(i, &x)| x + bias[i % m])
                .collect();
            let shape = sa.clone();
            let ng = self.nodes[a.0].needs_grad || self.nodes[b.0].needs_grad;
            return Ok(self.push(shape, values, Op::AddBias { a, bias: b }, ng));
        }
        self.binary_same_shape(a, b, "add", Op::Add { a, b }, |x, y| x + y)
    }

    pub fn sub(&mut self, a: Var, b: Var) -> Result<Var, AdError> {
        self.binary_same_shape(a, b, "sub", Op::Sub { a, b }, |x, y| x - y)
    }

    pub fn mul(&mut self, a: Var, b: Var) -> Result<Var, AdError> {
        self.binary_same_shape(a, b, "mul", Op::Mul { a, b }, |x, y| x * y)
    }

    pub fn div(&mut self, a: Var, b: Var) -> Result<Var, AdError> {
        if self.nodes[b.0].values.iter().any(|v| *v == F::ZERO) {
            return Err(AdError::DivByZero);
        }
        self.binary_same_shape(a, b, "div", Op::Div { a, b }, |x, y| x / y)
    }

    pub fn neg(&mut self, a: Var) -> Var {
        self.unary(a, Op::Neg { a }, |x| -x)
    }

    pub fn exp(&mut self, a: Var) -> Var {
        self.unary(a, Op::Exp { a }, |x| x.exp())
    }

    pub fn log(&mut self, a: Var) -> Result<Var, AdError> {
        if let Some(bad) = self.nodes[a.0].values.iter().find(|v| **v <= F::ZERO) {
            return Err(AdError::LogDomain(bad.to_f64()));
        }
        Ok(self.unary(a, Op::Log { a }, |x| x.ln()))
    }

    pub fn abs(&mut self, a: Var) -> Var {
        self.unary(a, Op::Abs { a }, |x| x.abs())
    }

    pub fn relu(&mut self, a: Var) -> Var {
        self.unary(a, Op::Relu { a }, |x| x.maximum(F::ZERO))
    }

    pub fn elu(&mut self, a: Var, alpha: F) -> Var {
        self.unary(a, Op::Elu { a, alpha }, |x| {
            if x > F::ZERO {
                x
            } else {
                alpha * (x.exp() - F::ONE)
            }
        })
    }

    pub fn tanh(&mut self, a: Var) -> Var {
        self.unary(a, Op::Tanh { a }, |x| x.tanh())
    }

    pub fn sigmoid(&mut self, a: Var) -> Var {
        self.unary(a, Op::Sigmoid { a }, |x| F::ONE / (F::ONE + (-x).exp()))
    }

    pub fn square(&mut self, a: Var) -> Var {
        self.unary(a, Op::Square { a }, |x| x * x)
    }

    pub fn add_scalar(&mut self, a: Var, c: F) -> Var {
        self.unary(a, Op::AddScalar { a }, |x| x + c)
    }

    pub fn mul_scalar(&mut self, a: Var, c: F) -> Var {
        self.unary(a, Op::MulScalar { a, c }, |x| x * c)
    }

    // ---- rows over the last axis ----

    fn last_axis(&self, a: Var) -> (usize, usize) {
        let shape = &self.nodes[a.0].shape;
        let m = *shape.last().expect("rank >= 1");
        (self.nodes[a.0].values.len() / m, m)
    }

    /// Numerically stable softmax over the last axis.
    pub fn softmax(&mut self, a: Var) -> Var {
        let (rows, m) = self.last_axis(a);
        let x = &self.nodes[a.0].values;
        let mut values = vec![F::ZERO; x.len()];
        for r in 0..rows {
            let row = &x[r * m..(r + 1) * m];
            let mx = row.iter().fold(row[0], |acc, &v| acc.maximum(v));
            let mut sum = F::ZERO;
            for j in 0..m {
                let e = (row[j] - mx).exp();
                values[r * m + j] = e;
                sum = sum + e;
            }
            for j in 0..m {
                values[r * m + j] = values[r * m + j] / sum;
            }
        }
        let shape = self.nodes[a.0].shape.clone();
        let ng = self.nodes[a.0].needs_grad;
        self.push(shape, values, Op::Softmax { a }, ng)
    }

    pub fn log_softmax(&mut self, a: Var) -> Var {
        let (rows, m) = self.last_axis(a);
        let x = &self.nodes[a.0].values;
        let mut values = vec![F::ZERO; x.len()];
        for r in 0..rows {
            let row = &x[r * m..(r + 1) * m];
            let mx = row.iter().fold(row[0], |acc, &v| acc.maximum(v));
            let mut sum = F::ZERO;
            for j in 0..m {
                sum = sum + (row[j] - mx).exp();
            }
            let lse = mx + sum.ln();
            for j in 0..m {
                values[r * m + j] = row[j] - lse;
            }
        }
        let shape = self.nodes[a.0].shape.clone();
        let ng = self.nodes[a.0].needs_grad;
        self.push(shape, values, Op::LogSoftmax { a }, ng)
    }

    /// Sum over the last axis, dropping it: `[.., m] -> [..]`.
    pub fn sum_last(&mut self, a: Var) -> Var {
        let (rows, m) = self.last_axis(a);
        let x = &self.nodes[a.0].values;
        let values: Vec<F> = (0..rows)
            .map(|r| {
                let mut s = F::ZERO;
                for j in 0..m {
                    s = s + x[r * m + j];
                }
                s
            })
            .collect();
        let mut shape = self.nodes[a.0].shape.clone();
        shape.pop();
        if shape.is_empty() {
            shape.push(1);
        }
        let ng = self.nodes[a.0].needs_grad;
        self.push(shape, values, Op::SumLast { a }, ng)
    }

    pub fn sum(&mut self, a: Var) -> Var {
        let mut s = F::ZERO;
        for &v in &self.nodes[a.0].values {
            s = s + v;
        }
        let ng = self.nodes[a.0].needs_grad;
        self.push(vec![1], vec![s], Op::Sum { a }, ng)
    }

    pub fn mean(&mut self, a: Var) -> Var {
        let n = self.nodes[a.0].values.len();
        let mut s = F::ZERO;
        for &v in &self.nodes[a.0].values {
            s = s + v;
        }
        let ng = self.nodes[a.0].needs_grad;
        self.push(
            vec![1],
            vec![s / F::from_f64(n as f64)],
            Op::Mean { a },
            ng,
        )
    }

    // ---- linear algebra ----

    pub fn matmul(&mut self, a: Var, b: Var) -> Result<Var, AdError> {
        let (sa, sb) = (&self.nodes[a.0].shape, &self.nodes[b.0].shape);
        if sa.len() != 2 || sb.len() != 2 || sa[1] != sb[0] {
            return Err(AdError::BadShape(format!("matmul: {sa:?} x {sb:?}")));
        }
        let (n, k, m) = (sa[0], sa[1], sb[1]);
        let mut values = vec![F::ZERO; n * m];
        matmul_nn(&self.nodes[a.0].values, &self.nodes[b.0].values, n, k, m, &mut values);
        let ng = self.nodes[a.0].needs_grad || self.nodes[b.0].needs_grad;
        Ok(self.push(vec![n, m], values, Op::Matmul { a, b }, ng))
    }

    pub fn transpose2d(&mut self, a: Var) -> Result<Var, AdError> {
        let sa = &self.nodes[a.0].shape;
        if sa.len() != 2 {
            return Err(AdError::BadShape(format!("transpose2d: {sa:?}")));
        }
        let (n, m) = (sa[0], sa[1]);
        let x = &self.nodes[a.0].values;
        let mut values = vec![F::ZERO; n * m];
        for i in 0..n {
            for j in 0..m {
                values[j * n + i] = x[i * m + j];
            }
        }
        let ng = self.nodes[a.0].needs_grad;
        Ok(self.push(vec![m, n], values, Op::Transpose2d { a }, ng))
    }

    // ---- shape ----

    pub fn reshape(&mut self, a: Var, shape: Vec<usize>) -> Result<Var, AdError> {
        if shape.iter().product::<usize>() != self.nodes[a.0].values.len() {
            return Err(AdError::BadShape(format!(
                "reshape {:?} -> {shape:?}",
                self.nodes[a.0].shape
            )));
        }
        let values = self.nodes[a.0].values.clone();
        let ng = self.nodes[a.0].needs_grad;
        Ok(self.push(shape, values, Op::Reshape { a }, ng))
    }

    /// Contiguous range along one axis.
    pub fn slice(&mut self, a: Var, axis: usize, start: usize, len: usize) -> Result<Var, AdError> {
        let sa = self.nodes[a.0].shape.clone();
        if axis >= sa.len() || start + len > sa[axis] || len == 0 {
            return Err(AdError::BadShape(format!(
                "slice axis {axis} [{start}..{}] of {sa:?}",
                start + len
            )));
        }
        let mut out_shape = sa.clone();
        out_shape[axis] = len;
        let st = strides(&sa);
        let out_st = strides(&out_shape);
        let numel: usize = out_shape.iter().product();
        let x = &self.nodes[a.0].values;
        let mut values = vec![F::ZERO; numel];
        for (o, value) in values.iter_mut().enumerate() {
            let mut rem = o;
            let mut src = 0usize;
            for (d, &os) in out_st.iter().enumerate() {
                let c = rem / os;
                rem %= os;
                let c_src = if d == axis { c + start } else { c };
                src += c_src * st[d];
            }
            *value = x[src];
        }
        let ng = self.nodes[a.0].needs_grad;
        Ok(self.push(out_shape, values, Op::Slice { a, axis, start }, ng))
    }

    /// Concatenate along `axis`; parts must agree on every other axis.
    pub fn concat(&mut self, parts: &[Var], axis: usize) -> Result<Var, AdError> {
        if parts.is_empty() {
            return Err(AdError::BadShape("concat of zero parts".into()));
        }
        let rank = self.nodes[parts[0].0].shape.len();
        if axis >= rank {
            return Err(AdError::BadShape(format!("concat axis {axis}, rank {rank}")));
        }
        let mut out_shape = self.nodes[parts[0].0].shape.clone();
        out_shape[axis] = 0;
        for p in parts {
            let sp = &self.nodes[p.0].shape;
            if sp.len() != rank
                || sp.iter().enumerate().any(|(d, &e)| d != axis && e != out_shape[d])
            {
                return Err(AdError::BadShape(format!(
                    "concat shape {sp:?} vs {:?} on axis {axis}",
                    self.nodes[parts[0].0].shape
                )));
            }
            out_shape[axis] += sp[axis];
        }
        let numel: usize = out_shape.iter().product();
        let mut values = vec![F::ZERO; numel];
        // Views as [outer, axis_len, inner]: outer = prod(before axis), inner = prod(after).
        let outer: usize = out_shape[..axis].iter().product();
        let inner: usize = out_shape[axis + 1..].iter().product();
        let mut offset = 0usize;
        for p in parts {
            let pa = self.nodes[p.0].shape[axis];
            let x = &self.nodes[p.0].values;
            for ou in 0..outer {
                for c in 0..pa {
                    let src = (ou * pa + c) * inner;
                    let dst = (ou * out_shape[axis] + offset + c) * inner;
                    values[dst..dst + inner].copy_from_slice(&x[src..src + inner]);
                }
            }
            offset += pa;
        }
        let ng = parts.iter().any(|p| self.nodes[p.0].needs_grad);
        Ok(self.push(
            out_shape,
            values,
            Op::Concat { parts: parts.to_vec(), axis },
            ng,
        ))
    }

    // ---- image ops ----

    /// 2x2 max pooling, stride 2, on `[b, c, h, w]` with even `h`, `w`.
    pub fn max_pool2d(&mut self, a: Var) -> Result<Var, AdError> {
        let sa = self.nodes[a.0].shape.clone();
        if sa.len() != 4 || sa[2] % 2 != 0 || sa[3] % 2 != 0 {
            return Err(AdError::BadShape(format!("max_pool2d: {sa:?}")));
        }
        let (b, c, h, w) = (sa[0], sa[1], sa[2], sa[3]);
        let (oh, ow) = (h / 2, w / 2);
        let x = &self.nodes[a.0].values;
        let mut values = vec![F::ZERO; b * c * oh * ow];
        let mut argmax = vec![0usize; values.len()];
        for bc in 0..b * c {
            let base = bc * h * w;
            let obase = bc * oh * ow;
            for oy in 0..oh {
                for ox in 0..ow {
                    let mut best_idx = base + (2 * oy) * w + 2 * ox;
                    let mut best = x[best_idx];
                    for dy in 0..2 {
                        for dx in 0..2 {
                            let idx = base + (2 * oy + dy) * w + (2 * ox + dx);
                            if x[idx] > best {
                                best = x[idx];
                                best_idx = idx;
                            }
                        }
                    }
                    values[obase + oy * ow + ox] = best;
                    argmax[obase + oy * ow + ox] = best_idx;
                }
            }
        }
        let ng = self.nodes[a.0].needs_grad;
        Ok(self.push(vec![b, c, oh, ow], values, Op::MaxPool2d { a, argmax }, ng))
    }

    /// Valid (no padding) stride-1 convolution of `[b, ci, h, w]` with
    /// `[co, ci, kh, kw]` kernels, plus optional per-channel bias `[co]`.
    pub fn conv2d(&mut self, x: Var, w: Var, bias: Option<Var>) -> Result<Var, AdError> {
        let sx = self.nodes[x.0].shape.clone();
        let sw = self.nodes[w.0].shape.clone();
        if sx.len() != 4 || sw.len() != 4 || sx[1] != sw[1] || sw[2] > sx[2] || sw[3] > sx[3] {
            return Err(AdError::BadShape(format!("conv2d: {sx:?} * {sw:?}")));
        }
        let (b, ci, h, wd) = (sx[0], sx[1], sx[2], sx[3]);
        let (co, kh, kw) = (sw[0], sw[2], sw[3]);
        let (oh, ow) = (h - kh + 1, wd - kw + 1);
        if let Some(bv) = bias {
            if self.nodes[bv.0].shape != vec![co] {
                return Err(AdError::BadShape(format!(
                    "conv2d bias {:?}, expected [{co}]",
                    self.nodes[bv.0].shape
                )));
            }
        }
        let xs = &self.nodes[x.0].values;
        let ws = &self.nodes[w.0].values;
        let mut values = vec![F::ZERO; b * co * oh * ow];
        // Shifted-row accumulation: for each kernel tap, add a scaled input
        // row into the output row. The inner loop writes independent lanes,
        // which vectorizes where a dot-product reduction would not.
        for bi in 0..b {
            for o in 0..co {
                let out_base = (bi * co + o) * oh * ow;
                let bias_v = bias.map_or(F::ZERO, |bv| self.nodes[bv.0].values[o]);
                for i in 0..ci {
                    let x_base = (bi * ci + i) * h * wd;
                    let w_base = (o * ci + i) * kh * kw;
                    for ky in 0..kh {
                        for kx in 0..kw {
                            let wv = ws[w_base + ky * kw + kx];
                            if wv == F::ZERO {
                                continue;
                            }
                            for oy in 0..oh {
                                let xrow = x_base + (oy + ky) * wd + kx;
                                let orow = out_base + oy * ow;
                                let src = &xs[xrow..xrow + ow];
                                let dst = &mut values[orow..orow + ow];
                                for (d, &s) in dst.iter_mut().zip(src) {
                                    *d = *d + wv * s;
                                }
                            }
                        }
                    }
                }
                if bias.is_some() {
                    for v in &mut values[out_base..out_base + oh * ow] {
                        *v = *v + bias_v;
                    }
                }
            }
        }
        let ng = self.nodes[x.0].needs_grad
            || self.nodes[w.0].needs_grad
            || bias.is_some_and(|bv| self.nodes[bv.0].needs_grad);
        Ok(self.push(vec![b, co, oh, ow], values, Op::Conv2d { x, w, bias }, ng))
    }

    // ---- normalization / selection ----

    /// Layer normalization over the last axis with learned gain and bias.
    pub fn layer_norm(&mut self, a: Var, gamma: Var, beta: Var, eps: F) -> Result<Var, AdError> {
        let (rows, m) = self.last_axis(a);
        if self.nodes[gamma.0].shape != vec![m] || self.nodes[beta.0].shape != vec![m] {
            return Err(AdError::BadShape("layer_norm gain/bias".into()));
        }
        let x = &self.nodes[a.0].values;
        let g = &self.nodes[gamma.0].values;
        let bt = &self.nodes[beta.0].values;
        let mut values = vec![F::ZERO; x.len()];
        let mut normed = vec![F::ZERO; x.len()];
        let mut inv_std = vec![F::ZERO; rows];
        let inv_m = F::from_f64(1.0 / m as f64);
        for r in 0..rows {
            let row = &x[r * m..(r + 1) * m];
            let mut mu = F::ZERO;
            for &v in row {
                mu = mu + v;
            }
            mu = mu * inv_m;
            let mut var = F::ZERO;
            for &v in row {
                var = var + (v - mu) * (v - mu);
            }
            var = var * inv_m;
            let is = F::ONE / (var + eps).sqrt();
            inv_std[r] = is;
            for j in 0..m {
                let n = (row[j] - mu) * is;
                normed[r * m + j] = n;
                values[r * m + j] = n * g[j] + bt[j];
            }
        }
        let shape = self.nodes[a.0].shape.clone();
        let ng = self.nodes[a.0].needs_grad
            || self.nodes[gamma.0].needs_grad
            || self.nodes[beta.0].needs_grad;
        Ok(self.push(shape, values, Op::LayerNorm { a, gamma, beta, inv_std, normed }, ng))
    }

    /// Mean of embedding-table rows per group: `table` is `[v, d]`, each
    /// group is a non-empty list of row indices, output is `[groups, d]`.
    pub fn embed_mean(&mut self, table: Var, groups: Vec<Vec<usize>>) -> Result<Var, AdError> {
        let st = self.nodes[table.0].shape.clone();
        if st.len() != 2 || groups.is_empty() {
            return Err(AdError::BadShape("embed_mean".into()));
        }
        let (v, d) = (st[0], st[1]);
        let x = &self.nodes[table.0].values;
        let mut values = vec![F::ZERO; groups.len() * d];
        for (gi, group) in groups.iter().enumerate() {
            if group.is_empty() || group.iter().any(|&r| r >= v) {
                return Err(AdError::BadShape(format!("embed_mean group {gi}")));
            }
            let inv = F::from_f64(1.0 / group.len() as f64);
            for &r in group {
                for j in 0..d {
                    values[gi * d + j] = values[gi * d + j] + x[r * d + j] * inv;
                }
            }
        }
        let n = groups.len();
        let ng = self.nodes[table.0].needs_grad;
        Ok(self.push(vec![n, d], values, Op::EmbedMean { table, groups }, ng))
    }

    /// Gumbel-softmax over the last axis. `noise` must contain one standard
    /// Gumbel draw per element (pass zeros for the noiseless limit). With
    /// `hard`, the forward value is the one-hot argmax of the soft sample and
    /// the backward pass uses the soft sample's gradient (straight-through).
    pub fn gumbel_softmax(
        &mut self,
        logits: Var,
        noise: &[F],
        tau: F,
        hard: bool,
    ) -> Result<Var, AdError> {
        if tau <= F::ZERO {
            return Err(AdError::Invalid(format!(
                "gumbel temperature must be positive, got {}",
                tau.to_f64()
            )));
        }
        if noise.len() != self.nodes[logits.0].values.len() {
            return Err(AdError::BadShape("gumbel noise length".into()));
        }
        let inv_tau = F::ONE / tau;
        let perturbed: Vec<F> = self.nodes[logits.0]
            .values
            .iter()
            .zip(noise)
            .map(|(&l, &n)| (l + n) * inv_tau)
            .collect();
        let (rows, m) = self.last_axis(logits);
        let mut soft = vec![F::ZERO; perturbed.len()];
        for r in 0..rows {
            let row = &perturbed[r * m..(r + 1) * m];
            let mx = row.iter().fold(row[0], |acc, &v| acc.maximum(v));
            let mut sum = F::ZERO;
            for j in 0..m {
                let e = (row[j] - mx).exp();
                soft[r * m + j] = e;
                sum = sum + e;
            }
            for j in 0..m {
                soft[r * m + j] = soft[r * m + j] / sum;
            }
        }
        let values = if hard {
            let mut one_hot = vec![F::ZERO; soft.len()];
            for r in 0..rows {
                let row = &soft[r * m..(r + 1) * m];
                let mut best = 0;
                for j in 1..m {
                    if row[j] > row[best] {
                        best = j;
                    }
                }
                one_hot[r * m + best] = F::ONE;
            }
            one_hot
        } else {
            soft.clone()
        };
        let shape = self.nodes[logits.0].shape.clone();
        let ng = self.nodes[logits.0].needs_grad;
        Ok(self.push(shape, values, Op::GumbelSoftmax { logits, soft, inv_tau }, ng))
    }

    /// Replace the forward value while keeping the identity gradient: the
    /// output carries `values`, the backward pass hands the upstream
    /// gradient to `a` unchanged. Used to project estimator inputs onto
    /// their trained manifold without severing the extractor's gradient.
    pub fn straight_through(&mut self, a: Var, values: Vec<F>) -> Result<Var, AdError> {
        if values.len() != self.nodes[a.0].values.len() {
            return Err(AdError::BadShape(format!(
                "straight_through: {} values for {:?}",
                values.len(),
                self.nodes[a.0].shape
            )));
        }
        let shape = self.nodes[a.0].shape.clone();
        let ng = self.nodes[a.0].needs_grad;
        Ok(self.push(shape, values, Op::StraightThrough { a }, ng))
    }

    // ---- backward ----

    /// Reverse sweep from a scalar `loss`, filling gradients for every node
    /// that needs them. Idempotent: clears all gradients first.
    pub fn backward(&mut self, loss: Var) -> Result<(), AdError> {
        if self.nodes[loss.0].values.len() != 1 {
            return Err(AdError::NonScalarLoss(self.nodes[loss.0].values.len()));
        }
        self.grads.clear();
        self.grads
            .extend(self.nodes.iter().map(|n| vec![F::ZERO; n.values.len()]));
        self.grads[loss.0][0] = F::ONE;

        for id in (0..=loss.0).rev() {
            if !self.nodes[id].needs_grad {
                continue;
            }
            if self.grads[id].iter().all(|v| *v == F::ZERO) {
                continue;
            }
            self.backprop_node(id);
        }
        Ok(())
    }

    fn backprop_node(&mut self, id: usize) {
        let d = std::mem::take(&mut self.grads[id]);
        let op = self.nodes[id].op.clone();
        match &op {
            Op::Leaf => {}
            Op::Matmul { a, b } => {
                let (n, k) = (self.nodes[a.0].shape[0], self.nodes[a.0].shape[1]);
                let m = self.nodes[b.0].shape[1];
                if self.nodes[a.0].needs_grad {
                    let bvals = &self.nodes[b.0].values;
                    let mut da = vec![F::ZERO; n * k];
                    matmul_nt(&d, bvals, n, m, k, &mut da);
                    accumulate(&mut self.grads[a.0], &da);
                }
                if self.nodes[b.0].needs_grad {
                    let avals = &self.nodes[a.0].values;
                    let mut db = vec![F::ZERO; k * m];
                    matmul_tn(avals, &d, n, k, m, &mut db);
                    accumulate(&mut self.grads[b.0], &db);
                }
            }
            Op::Add { a, b } => {
                accumulate(&mut self.grads[a.0], &d);
                accumulate(&mut self.grads[b.0], &d);
            }
            Op::AddBias { a, bias } => {
                accumulate(&mut self.grads[a.0], &d);
                let m = self.nodes[bias.0].values.len();
                let gb = &mut self.grads[bias.0];
                for (i, &dv) in d.iter().enumerate() {
                    gb[i % m] = gb[i % m] + dv;
                }
            }
            Op::Sub { a, b } => {
                accumulate(&mut self.grads[a.0], &d);
                let gb = &mut self.grads[b.0];
                for (g, &dv) in gb.iter_mut().zip(&d) {
                    *g = *g - dv;
                }
            }
            Op::Mul { a, b } => {
                if self.nodes[a.0].needs_grad {
                    let bv = self.nodes[b.0].values.clone();
                    let ga = &mut self.grads[a.0];
                    for i in 0..d.len() {
                        ga[i] = ga[i] + d[i] * bv[i];
                    }
                }
                if self.nodes[b.0].needs_grad {
                    let av = self.nodes[a.0].values.clone();
                    let gb = &mut self.grads[b.0];
                    for i in 0..d.len() {
                        gb[i] = gb[i] + d[i] * av[i];
                    }
                }
            }
            Op::Div { a, b } => {
                let bv = self.nodes[b.0].values.clone();
                if self.nodes[a.0].needs_grad {
                    let ga = &mut self.grads[a.0];
                    for i in 0..d.len() {
                        ga[i] = ga[i] + d[i] / bv[i];
                    }
                }
                if self.nodes[b.0].needs_grad {
                    let av = self.nodes[a.0].values.clone();
                    let gb = &mut self.grads[b.0];
                    for i in 0..d.len() {
                        gb[i] = gb[i] - d[i] * av[i] / (bv[i] * bv[i]);
                    }
                }
            }
            Op::Neg { a } => {
                let ga = &mut self.grads[a.0];
                for (g, &dv) in ga.iter_mut().zip(&d) {
                    *g = *g - dv;
                }
            }
            Op::Exp { a } => {
                let out = self.nodes[id].values.clone();
                let ga = &mut self.grads[a.0];
                for i in 0..d.len() {
                    ga[i] = ga[i] + d[i] * out[i];
                }
            }
            Op::Log { a } => {
                let x = self.nodes[a.0].values.clone();
                let ga = &mut self.grads[a.0];
                for i in 0..d.len() {
                    ga[i] = ga[i] + d[i] / x[i];
                }
            }
            Op::Abs { a } => {
                let x = self.nodes[a.0].values.clone();
                let ga = &mut self.grads[a.0];
                for i in 0..d.len() {
                    let s = if x[i] > F::ZERO {
                        F::ONE
                    } else if x[i] < F::ZERO {
                        -F::ONE
                    } else {
                        F::ZERO
                    };
                    ga[i] = ga[i] + d[i] * s;
                }
            }
            Op::Relu { a } => {
                let x = self.nodes[a.0].values.clone();
                let ga = &mut self.grads[a.0];
                for i in 0..d.len() {
                    if x[i] > F::ZERO {
                        ga[i] = ga[i] + d[i];
                    }
                }
            }
            Op::Elu { a, alpha } => {
                let x = self.nodes[a.0].values.clone();
                let out = self.nodes[id].values.clone();
                let ga = &mut self.grads[a.0];
                for i in 0..d.len() {
                    let slope = if x[i] > F::ZERO { F::ONE } else { out[i] + *alpha };
                    ga[i] = ga[i] + d[i] * slope;
                }
            }
            Op::Tanh { a } => {
                let out = self.nodes[id].values.clone();
                let ga = &mut self.grads[a.0];
                for i in 0..d.len() {
                    ga[i] = ga[i] + d[i] * (F::ONE - out[i] * out[i]);
                }
            }
            Op::Sigmoid { a } => {
                let out = self.nodes[id].values.clone();
                let ga = &mut self.grads[a.0];
                for i in 0..d.len() {
                    ga[i] = ga[i] + d[i] * out[i] * (F::ONE - out[i]);
                }
            }
            Op::Square { a } => {
                let x = self.nodes[a.0].values.clone();
                let ga = &mut self.grads[a.0];
                for i in 0..d.len() {
                    ga[i] = ga[i] + d[i] * (x[i] + x[i]);
                }
            }
            Op::AddScalar { a } => accumulate(&mut self.grads[a.0], &d),
            Op::MulScalar { a, c } => {
                let ga = &mut self.grads[a.0];
                for i in 0..d.len() {
                    ga[i] = ga[i] + d[i] * *c;
                }
            }
            Op::Softmax { a } => {
                let out = self.nodes[id].values.clone();
                let m = *self.nodes[id].shape.last().unwrap();
                softmax_backward(&out, &d, m, &mut self.grads[a.0]);
            }
            Op::LogSoftmax { a } => {
                let out = self.nodes[id].values.clone();
                let m = *self.nodes[id].shape.last().unwrap();
                let rows = out.len() / m;
                let ga = &mut self.grads[a.0];
                for r in 0..rows {
                    let mut dsum = F::ZERO;
                    for j in 0..m {
                        dsum = dsum + d[r * m + j];
                    }
                    for j in 0..m {
                        let i = r * m + j;
                        ga[i] = ga[i] + d[i] - out[i].exp() * dsum;
                    }
                }
            }
            Op::Transpose2d { a } => {
                let (m, n) = (self.nodes[id].shape[0], self.nodes[id].shape[1]);
                let ga = &mut self.grads[a.0];
                for i in 0..m {
                    for j in 0..n {
                        ga[j * m + i] = ga[j * m + i] + d[i * n + j];
                    }
                }
            }
            Op::Reshape { a } => accumulate(&mut self.grads[a.0], &d),
            Op::Slice { a, axis, start } => {
                let sa = self.nodes[a.0].shape.clone();
                let so = self.nodes[id].shape.clone();
                let st = strides(&sa);
                let out_st = strides(&so);
                let ga = &mut self.grads[a.0];
                for (o, &dv) in d.iter().enumerate() {
                    let mut rem = o;
                    let mut src = 0usize;
                    for (dim, &os) in out_st.iter().enumerate() {
                        let c = rem / os;
                        rem %= os;
                        let c_src = if dim == *axis { c + start } else { c };
                        src += c_src * st[dim];
                    }
                    ga[src] = ga[src] + dv;
                }
            }
            Op::Concat { parts, axis } => {
                let so = self.nodes[id].shape.clone();
                let outer: usize = so[..*axis].iter().product();
                let inner: usize = so[*axis + 1..].iter().product();
                let total = so[*axis];
                let mut offset = 0usize;
                for p in parts {
                    let pa = self.nodes[p.0].shape[*axis];
                    if self.nodes[p.0].needs_grad {
                        let gp = &mut self.grads[p.0];
                        for ou in 0..outer {
                            for c in 0..pa {
                                let dst = (ou * pa + c) * inner;
                                let src = (ou * total + offset + c) * inner;
                                for i in 0..inner {
                                    gp[dst + i] = gp[dst + i] + d[src + i];
                                }
                            }
                        }
                    }
                    offset += pa;
                }
            }
            Op::Sum { a } => {
                let dv = d[0];
                let ga = &mut self.grads[a.0];
                for g in ga.iter_mut() {
                    *g = *g + dv;
                }
            }
            Op::SumLast { a } => {
                let m = *self.nodes[a.0].shape.last().unwrap();
                let ga = &mut self.grads[a.0];
                for (i, g) in ga.iter_mut().enumerate() {
                    *g = *g + d[i / m];
                }
            }
            Op::Mean { a } => {
                let n = self.nodes[a.0].values.len();
                let dv = d[0] / F::from_f64(n as f64);
                let ga = &mut self.grads[a.0];
                for g in ga.iter_mut() {
                    *g = *g + dv;
                }
            }
            Op::MaxPool2d { a, argmax } => {
                let ga = &mut self.grads[a.0];
                for (o, &src) in argmax.iter().enumerate() {
                    ga[src] = ga[src] + d[o];
                }
            }
            Op::Conv2d { x, w, bias } => {
                let sx = self.nodes[x.0].shape.clone();
                let sw = self.nodes[w.0].shape.clone();
                let (b, ci, h, wd) = (sx[0], sx[1], sx[2], sx[3]);
                let (co, kh, kw) = (sw[0], sw[2], sw[3]);
                let (oh, ow) = (h - kh + 1, wd - kw + 1);
                if self.nodes[x.0].needs_grad {
                    let ws = self.nodes[w.0].values.clone();
                    let gx = &mut self.grads[x.0];
                    for bi in 0..b {
                        for o in 0..co {
                            let d_base = (bi * co + o) * oh * ow;
                            for i in 0..ci {
                                let x_base = (bi * ci + i) * h * wd;
                                let w_base = (o * ci + i) * kh * kw;
                                for ky in 0..kh {
                                    for kx in 0..kw {
                                        let wv = ws[w_base + ky * kw + kx];
                                        if wv == F::ZERO {
                                            continue;
                                        }
                                        for oy in 0..oh {
                                            let xrow = x_base + (oy + ky) * wd + kx;
                                            let drow = d_base + oy * ow;
                                            let src = &d[drow..drow + ow];
                                            let dst = &mut gx[xrow..xrow + ow];
                                            for (gv, &dv) in dst.iter_mut().zip(src) {
                                                *gv = *gv + wv * dv;
                                            }
                                        }
                                    }
                                }
                            }
                        }
                    }
                }
                if self.nodes[w.0].needs_grad {
                    let xs = self.nodes[x.0].values.clone();
                    let gw = &mut self.grads[w.0];
                    for bi in 0..b {
                        for o in 0..co {
                            let d_base = (bi * co + o) * oh * ow;
                            for i in 0..ci {
                                let x_base = (bi * ci + i) * h * wd;
                                let w_base = (o * ci + i) * kh * kw;
                                for ky in 0..kh {
                                    for kx in 0..kw {
                                        let mut s = F::ZERO;
                                        for oy in 0..oh {
                                            let xrow = x_base + (oy + ky) * wd + kx;
                                            let drow = d_base + oy * ow;
                                            let xsrc = &xs[xrow..xrow + ow];
                                            let dsrc = &d[drow..drow + ow];
                                            for (xv, dv) in xsrc.iter().zip(dsrc) {
                                                s = s + *xv * *dv;
                                            }
                                        }
                                        gw[w_base + ky * kw + kx] =
                                            gw[w_base + ky * kw + kx] + s;
                                    }
                                }
                            }
                        }
                    }
                }
                if let Some(bv) = bias {
                    if self.nodes[bv.0].needs_grad {
                        let gb = &mut self.grads[bv.0];
                        for bi in 0..b {
                            for o in 0..co {
                                let d_base = (bi * co + o) * oh * ow;
                                let mut s = F::ZERO;
                                for &dv in &d[d_base..d_base + oh * ow] {
                                    s = s + dv;
                                }
                                gb[o] = gb[o] + s;
                            }
                        }
                    }
                }
            }
            Op::LayerNorm { a, gamma, beta, inv_std, normed } => {
                let m = *self.nodes[id].shape.last().unwrap();
                let rows = d.len() / m;
                let g = self.nodes[gamma.0].values.clone();
                if self.nodes[gamma.0].needs_grad {
                    let gg = &mut self.grads[gamma.0];
                    for r in 0..rows {
                        for j in 0..m {
                            gg[j] = gg[j] + d[r * m + j] * normed[r * m + j];
                        }
                    }
                }
                if self.nodes[beta.0].needs_grad {
                    let gb = &mut self.grads[beta.0];
                    for r in 0..rows {
                        for j in 0..m {
                            gb[j] = gb[j] + d[r * m + j];
                        }
                    }
                }
                if self.nodes[a.0].needs_grad {
                    let inv_m = F::from_f64(1.0 / m as f64);
                    let ga = &mut self.grads[a.0];
                    for r in 0..rows {
                        // dxhat_j = d_j * gamma_j; dx follows the standard
                        // layer-norm backward in terms of row sums.
                        let mut sum_dxhat = F::ZERO;
                        let mut sum_dxhat_xhat = F::ZERO;
                        for j in 0..m {
                            let dxhat = d[r * m + j] * g[j];
                            sum_dxhat = sum_dxhat + dxhat;
                            sum_dxhat_xhat = sum_dxhat_xhat + dxhat * normed[r * m + j];
                        }
                        for j in 0..m {
                            let dxhat = d[r * m + j] * g[j];
                            let dx = (dxhat - (sum_dxhat + normed[r * m + j] * sum_dxhat_xhat) * inv_m)
                                * inv_std[r];
                            ga[r * m + j] = ga[r * m + j] + dx;
                        }
                    }
                }
            }
            Op::EmbedMean { table, groups } => {
                let dcols = self.nodes[id].shape[1];
                let gt = &mut self.grads[table.0];
                for (gi, group) in groups.iter().enumerate() {
                    let inv = F::from_f64(1.0 / group.len() as f64);
                    for &r in group {
                        for j in 0..dcols {
                            gt[r * dcols + j] = gt[r * dcols + j] + d[gi * dcols + j] * inv;
                        }
                    }
                }
            }
            Op::GumbelSoftmax { logits, soft, inv_tau } => {
                let m = *self.nodes[id].shape.last().unwrap();
                let mut dl = vec![F::ZERO; d.len()];
                softmax_backward(soft, &d, m, &mut dl);
                let gl = &mut self.grads[logits.0];
                for i in 0..dl.len() {
                    gl[i] = gl[i] + dl[i] * *inv_tau;
                }
            }
            Op::StraightThrough { a } => accumulate(&mut self.grads[a.0], &d),
        }
        self.grads[id] = d;
    }
}

fn accumulate<F: Scalar>(dst: &mut [F], src: &[F]) {
    for (g, &s) in dst.iter_mut().zip(src) {
        *g = *g + s;
    }
}

/// dX_i = out_i * (d_i - sum_j d_j out_j), per row of width `m`.
fn softmax_backward<F: Scalar>(out: &[F], d: &[F], m: usize, dst: &mut [F]) {
    let rows = out.len() / m;
    for r in 0..rows {
        let mut dot = F::ZERO;
        for j in 0..m {
            dot = dot + d[r * m + j] * out[r * m + j];
        }
        for j in 0..m {
            let i = r * m + j;
            dst[i] = dst[i] + out[i] * (d[i] - dot);
        }
    }
}

/// C[n,m] += A[n,k] * B[k,m]
pub(crate) fn matmul_nn<F: Scalar>(a: &[F], b: &[F], n: usize, k: usize, m: usize, c: &mut [F]) {
    for i in 0..n {
        for p in 0..k {
            let aip = a[i * k + p];
            if aip == F::ZERO {
                continue;
            }
            let brow = &b[p * m..(p + 1) * m];
            let crow = &mut c[i * m..(i + 1) * m];
            for j in 0..m {
                crow[j] = crow[j] + aip * brow[j];
            }
        }
    }
}

/// C[n,k] += A[n,m] * B[k,m]^T
fn matmul_nt<F: Scalar>(a: &[F], b: &[F], n: usize, m: usize, k: usize, c: &mut [F]) {
    for i in 0..n {
        let arow = &a[i * m..(i + 1) * m];
        for p in 0..k {
            let brow = &b[p * m..(p + 1) * m];
            let mut s = F::ZERO;
            for j in 0..m {
                s = s + arow[j] * brow[j];
            }
            c[i * k + p] = c[i * k + p] + s;
        }
    }
}

/// C[k,m] += A[n,k]^T * B[n,m]
fn matmul_tn<F: Scalar>(a: &[F], b: &[F], n: usize, k: usize, m: usize, c: &mut [F]) {
    for i in 0..n {
        let brow = &b[i * m..(i + 1) * m];
        for p in 0..k {
            let aip = a[i * k + p];
            if aip == F::ZERO {
                continue;
            }
            let crow = &mut c[p * m..(p + 1) * m];
            for j in 0..m {
                crow[j] = crow[j] + aip * brow[j];
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn leaf(g: &mut Graph<f64>, shape: Vec<usize>, values: Vec<f64>) -> Var {
        let t = Tensor::new(shape, values).unwrap().with_grad();
        g.leaf(&t)
    }

    #[test]
    fn softmax_uniform_logits() {
        let mut g = Graph::<f64>::new();
        let x = g.constant(vec![3], vec![0.0, 0.0, 0.0]).unwrap();
        let y = g.softmax(x);
        for &v in g.values(y) {
            assert!((v - 1.0 / 3.0).abs() < 1e-12);
        }
    }

    #[test]
    fn relu_definition() {
        let mut g = Graph::<f32>::new();
        let x = g.constant(vec![2], vec![-1.0, 2.0]).unwrap();
        let y = g.relu(x);
        assert_eq!(g.values(y), &[0.0, 2.0]);
    }

    #[test]
    fn conv2d_output_shape_28_to_24() {
        let mut g = Graph::<f32>::new();
        let x = g.constant(vec![1, 1, 28, 28], vec![0.0; 28 * 28]).unwrap();
        let w = g.constant(vec![1, 1, 5, 5], vec![0.0; 25]).unwrap();
        let y = g.conv2d(x, w, None).unwrap();
        assert_eq!(g.shape(y), &[1, 1, 24, 24]);
    }

    #[test]
    fn backward_sum_of_squares() {
        let mut g = Graph::<f64>::new();
        let x = leaf(&mut g, vec![2], vec![1.0, 2.0]);
        let sq = g.square(x);
        let loss = g.sum(sq);
        g.backward(loss).unwrap();
        assert_eq!(g.grad(x), &[2.0, 4.0]);
    }

    #[test]
    fn backward_is_idempotent() {
        let mut g = Graph::<f64>::new();
        let x = leaf(&mut g, vec![2], vec![3.0, -1.5]);
        let sq = g.square(x);
        let loss = g.sum(sq);
        g.backward(loss).unwrap();
        let first = g.grad(x).to_vec();
        g.backward(loss).unwrap();
        assert_eq!(g.grad(x), &first[..]);
    }

    #[test]
    fn unreachable_gradients_are_zero() {
        let mut g = Graph::<f64>::new();
        let x = leaf(&mut g, vec![2], vec![1.0, 2.0]);
        let y = leaf(&mut g, vec![2], vec![5.0, 6.0]);
        let sq = g.square(x);
        let loss = g.sum(sq);
        g.backward(loss).unwrap();
        assert_eq!(g.grad(y), &[0.0, 0.0]);
    }

    #[test]
    fn backward_rejects_non_scalar_loss() {
        let mut g = Graph::<f64>::new();
        let x = leaf(&mut g, vec![2], vec![1.0, 2.0]);
        let y = g.square(x);
        assert!(matches!(g.backward(y), Err(AdError::NonScalarLoss(2))));
    }

    #[test]
    fn matmul_against_naive_loops() {
        let mut g = Graph::<f64>::new();
        let a_vals: Vec<f64> = (0..6).map(|i| i as f64 * 0.5 - 1.0).collect();
        let b_vals: Vec<f64> = (0..12).map(|i| (i as f64).sin()).collect();
        let a = g.constant(vec![2, 3], a_vals.clone()).unwrap();
        let b = g.constant(vec![3, 4], b_vals.clone()).unwrap();
        let c = g.matmul(a, b).unwrap();
        for i in 0..2 {
            for j in 0..4 {
                let mut s = 0.0;
                for p in 0..3 {
                    s += a_vals[i * 3 + p] * b_vals[p * 4 + j];
                }
                assert!((g.values(c)[i * 4 + j] - s).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn log_rejects_non_positive() {
        let mut g = Graph::<f64>::new();
        let x = g.constant(vec![2], vec![1.0, 0.0]).unwrap();
        assert!(matches!(g.log(x), Err(AdError::LogDomain(_))));
    }

    #[test]
    fn div_rejects_zero() {
        let mut g = Graph::<f64>::new();
        let a = g.constant(vec![1], vec![1.0]).unwrap();
        let b = g.constant(vec![1], vec![0.0]).unwrap();
        assert!(matches!(g.div(a, b), Err(AdError::DivByZero)));
    }

    #[test]
    fn slice_and_concat_roundtrip() {
        let mut g = Graph::<f64>::new();
        let x = g
            .constant(vec![2, 3], vec![1.0, 2.0, 3.0, 4.0, 5.0, 6.0])
            .unwrap();
        let left = g.slice(x, 1, 0, 1).unwrap();
        let right = g.slice(x, 1, 1, 2).unwrap();
        let back = g.concat(&[left, right], 1).unwrap();
        assert_eq!(g.values(back), g.values(x));
        let top = g.slice(x, 0, 0, 1).unwrap();
        assert_eq!(g.values(top), &[1.0, 2.0, 3.0]);
    }

    #[test]
    fn gumbel_hard_is_one_hot_argmax_without_noise() {
        let mut g = Graph::<f64>::new();
        let l = g.constant(vec![4], vec![0.1, 2.0, -1.0, 0.5]).unwrap();
        let y = g.gumbel_softmax(l, &[0.0; 4], 1e-6, true).unwrap();
        assert_eq!(g.values(y), &[0.0, 1.0, 0.0, 0.0]);
    }

    #[test]
    fn gumbel_rejects_non_positive_temperature() {
        let mut g = Graph::<f64>::new();
        let l = g.constant(vec![2], vec![0.0, 1.0]).unwrap();
        assert!(g.gumbel_softmax(l, &[0.0; 2], 0.0, false).is_err());
    }
}
