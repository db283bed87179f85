use std::collections::BTreeMap;

use super::params::ParamKey;
use super::tensor::{gemm, Tensor};
use crate::error::{DfpError, Result};

/// Index of a node on a [`Tape`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct NodeId(usize);

impl NodeId {
    pub fn index(self) -> usize {
        self.0
    }
}

/// Normalization statistics used by a batch-norm node.
#[derive(Debug, Clone, Copy)]
pub enum NormStats<'a> {
    /// Normalize with the statistics of the current batch.
    Batch,
    /// Normalize with frozen running statistics.
    Frozen { mean: &'a [f64], var: &'a [f64] },
}

#[derive(Debug)]
enum Op {
    Input,
    Parameter(ParamKey),
    Affine { x: NodeId, w: NodeId, b: NodeId },
    Relu(NodeId),
    Concat(Vec<NodeId>),
    Add(NodeId, NodeId),
    Mul(NodeId, NodeId),
    Scale(NodeId, f64),
    Square(NodeId),
    ReduceMean(NodeId),
    ReduceSum(NodeId),
    BatchNorm {
        x: NodeId,
        gamma: NodeId,
        beta: NodeId,
        batch: bool,
        normalized: Tensor,
        inv_std: Vec<f64>,
        batch_mean: Vec<f64>,
        batch_var: Vec<f64>,
    },
}

impl Op {
    fn name(&self) -> &'static str {
        match self {
            Op::Input => "input",
            Op::Parameter(_) => "parameter",
            Op::Affine { .. } => "affine",
            Op::Relu(_) => "relu",
            Op::Concat(_) => "concat",
            Op::Add(..) => "add",
            Op::Mul(..) => "mul",
            Op::Scale(..) => "scale",
            Op::Square(_) => "square",
            Op::ReduceMean(_) => "reduce_mean",
            Op::ReduceSum(_) => "reduce_sum",
            Op::BatchNorm { .. } => "batch_norm",
        }
    }
}

#[derive(Debug)]
struct Node {
    op: Op,
    value: Tensor,
    requires_grad: bool,
}

/// Define-by-run reverse-mode tape.
///
/// Every op is evaluated as it is recorded, so node values are available
/// immediately and the node list is already in topological order.
#[derive(Debug, Default)]
pub struct Tape {
    nodes: Vec<Node>,
}

/// Gradients of a scalar output with respect to every parameter node,
/// summed over all nodes that share a key.
#[derive(Debug, Default, Clone)]
pub struct Gradients {
    grads: BTreeMap<ParamKey, Tensor>,
}

impl Gradients {
    pub fn get(&self, key: ParamKey) -> Option<&Tensor> {
        self.grads.get(&key)
    }

    pub fn iter(&self) -> impl Iterator<Item = (&ParamKey, &Tensor)> {
        self.grads.iter()
    }

    pub fn len(&self) -> usize {
        self.grads.len()
    }

    pub fn is_empty(&self) -> bool {
        self.grads.is_empty()
    }
}

fn mismatch(op: &'static str, detail: String) -> DfpError {
    DfpError::ShapeMismatch { op, detail }
}

impl Tape {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn value(&self, id: NodeId) -> &Tensor {
        &self.nodes[id.0].value
    }

    pub fn op_name(&self, id: NodeId) -> &'static str {
        self.nodes[id.0].op.name()
    }

    /// Mean and (biased) variance of the batch seen by a batch-norm node in
    /// batch mode.
    pub fn batch_stats(&self, id: NodeId) -> Option<(&[f64], &[f64])> {
        match &self.nodes[id.0].op {
            Op::BatchNorm {
                batch: true,
                batch_mean,
                batch_var,
                ..
            } => Some((batch_mean, batch_var)),
            _ => None,
        }
    }

    fn push(&mut self, op: Op, value: Tensor, requires_grad: bool) -> NodeId {
        self.nodes.push(Node {
            op,
            value,
            requires_grad,
        });
        NodeId(self.nodes.len() - 1)
    }

    fn rg(&self, id: NodeId) -> bool {
        self.nodes[id.0].requires_grad
    }

    /// Constant data; never differentiated.
    pub fn input(&mut self, value: Tensor) -> NodeId {
        self.push(Op::Input, value, false)
    }

    /// Differentiable leaf whose gradient is reported under `key`.
    pub fn parameter(&mut self, key: ParamKey, value: Tensor) -> NodeId {
        self.push(Op::Parameter(key), value, true)
    }

    /// `x W + b` with `x: [rows, in]`, `W: [in, out]`, `b: [out]`.
    pub fn affine(&mut self, x: NodeId, w: NodeId, b: NodeId) -> Result<NodeId> {
        let (xv, wv, bv) = (self.value(x), self.value(w), self.value(b));
        if wv.shape().len() != 2 || xv.shape().len() != 2 || xv.cols() != wv.rows() || bv.len() != wv.cols() {
            return Err(mismatch(
                "affine",
                format!("x {:?}, W {:?}, b {:?}", xv.shape(), wv.shape(), bv.shape()),
            ));
        }
        let (m, k, n) = (xv.rows(), xv.cols(), wv.cols());
        let mut out = Vec::with_capacity(m * n);
        for _ in 0..m {
            out.extend_from_slice(bv.values());
        }
        gemm(xv.values(), false, wv.values(), false, m, k, n, &mut out, true);
        let rg = self.rg(x) || self.rg(w) || self.rg(b);
        let value = Tensor::matrix(m, n, out)?;
        Ok(self.push(Op::Affine { x, w, b }, value, rg))
    }

    pub fn relu(&mut self, x: NodeId) -> NodeId {
        let value = self.value(x).map(|v| if v > 0.0 { v } else { 0.0 });
        let rg = self.rg(x);
        self.push(Op::Relu(x), value, rg)
    }

    /// Column-wise concatenation of matrices with equal row counts.
    pub fn concat(&mut self, parts: &[NodeId]) -> Result<NodeId> {
        if parts.is_empty() {
            return Err(mismatch("concat", "no inputs".into()));
        }
        let rows = self.value(parts[0]).rows();
        let mut cols = 0;
        for &p in parts {
            let v = self.value(p);
            if v.shape().len() != 2 || v.rows() != rows {
                return Err(mismatch(
                    "concat",
                    format!("part {:?} does not have {rows} rows", v.shape()),
                ));
            }
            cols += v.cols();
        }
        let mut out = Vec::with_capacity(rows * cols);
        for r in 0..rows {
            for &p in parts {
                out.extend_from_slice(self.value(p).row(r));
            }
        }
        let rg = parts.iter().any(|&p| self.rg(p));
        let value = Tensor::matrix(rows, cols, out)?;
        Ok(self.push(Op::Concat(parts.to_vec()), value, rg))
    }

    fn same_shape(&self, op: &'static str, a: NodeId, b: NodeId) -> Result<()> {
        if self.value(a).shape() != self.value(b).shape() {
            return Err(mismatch(
                op,
                format!("{:?} vs {:?}", self.value(a).shape(), self.value(b).shape()),
            ));
        }
        Ok(())
    }

    pub fn add(&mut self, a: NodeId, b: NodeId) -> Result<NodeId> {
        self.same_shape("add", a, b)?;
        let value = self.value(a).zip_map(self.value(b), |x, y| x + y);
        let rg = self.rg(a) || self.rg(b);
        Ok(self.push(Op::Add(a, b), value, rg))
    }

    /// Elementwise product.
    pub fn mul(&mut self, a: NodeId, b: NodeId) -> Result<NodeId> {
        self.same_shape("mul", a, b)?;
        let value = self.value(a).zip_map(self.value(b), |x, y| x * y);
        let rg = self.rg(a) || self.rg(b);
        Ok(self.push(Op::Mul(a, b), value, rg))
    }

    pub fn scale(&mut self, a: NodeId, factor: f64) -> NodeId {
        let value = self.value(a).map(|x| x * factor);
        let rg = self.rg(a);
        self.push(Op::Scale(a, factor), value, rg)
    }

    pub fn square(&mut self, a: NodeId) -> NodeId {
        let value = self.value(a).map(|x| x * x);
        let rg = self.rg(a);
        self.push(Op::Square(a), value, rg)
    }

    pub fn reduce_mean(&mut self, a: NodeId) -> NodeId {
        let v = self.value(a);
        let mean = v.values().iter().sum::<f64>() / v.len() as f64;
        let rg = self.rg(a);
        self.push(Op::ReduceMean(a), Tensor::scalar(mean), rg)
    }

    pub fn reduce_sum(&mut self, a: NodeId) -> NodeId {
        let sum = self.value(a).values().iter().sum::<f64>();
        let rg = self.rg(a);
        self.push(Op::ReduceSum(a), Tensor::scalar(sum), rg)
    }

    /// Per-feature normalization of `x: [rows, features]` followed by the
    /// learnable scale `gamma` and shift `beta`.
    pub fn batch_norm(
        &mut self,
        x: NodeId,
        gamma: NodeId,
        beta: NodeId,
        stats: NormStats<'_>,
        eps: f64,
    ) -> Result<NodeId> {
        let xv = self.value(x);
        let (rows, f) = (xv.rows(), xv.cols());
        if xv.shape().len() != 2 || self.value(gamma).len() != f || self.value(beta).len() != f {
            return Err(mismatch(
                "batch_norm",
                format!(
                    "x {:?}, gamma {:?}, beta {:?}",
                    xv.shape(),
                    self.value(gamma).shape(),
                    self.value(beta).shape()
                ),
            ));
        }
        let (mean, var, batch) = match stats {
            NormStats::Batch => {
                if rows == 0 {
                    return Err(mismatch("batch_norm", "empty batch".into()));
                }
                let mut mean = vec![0.0; f];
                for r in 0..rows {
                    for (m, v) in mean.iter_mut().zip(xv.row(r)) {
                        *m += v;
                    }
                }
                mean.iter_mut().for_each(|m| *m /= rows as f64);
                let mut var = vec![0.0; f];
                for r in 0..rows {
                    for ((s, v), m) in var.iter_mut().zip(xv.row(r)).zip(&mean) {
                        *s += (v - m) * (v - m);
                    }
                }
                var.iter_mut().for_each(|s| *s /= rows as f64);
                (mean, var, true)
            }
            NormStats::Frozen { mean, var } => {
                if mean.len() != f || var.len() != f {
                    return Err(mismatch("batch_norm", "running statistics width".into()));
                }
                (mean.to_vec(), var.to_vec(), false)
            }
        };
        let inv_std: Vec<f64> = var.iter().map(|v| 1.0 / (v + eps).sqrt()).collect();
        let gv = self.value(gamma).values();
        let bv = self.value(beta).values();
        let mut normalized = Vec::with_capacity(rows * f);
        let mut out = Vec::with_capacity(rows * f);
        for r in 0..rows {
            for (j, v) in xv.row(r).iter().enumerate() {
                let z = (v - mean[j]) * inv_std[j];
                normalized.push(z);
                out.push(gv[j] * z + bv[j]);
            }
        }
        let rg = self.rg(x) || self.rg(gamma) || self.rg(beta);
        let value = Tensor::matrix(rows, f, out)?;
        let normalized = Tensor::matrix(rows, f, normalized)?;
        Ok(self.push(
            Op::BatchNorm {
                x,
                gamma,
                beta,
                batch,
                normalized,
                inv_std,
                batch_mean: if batch { mean } else { Vec::new() },
                batch_var: if batch { var } else { Vec::new() },
            },
            value,
            rg,
        ))
    }

    /// Reverse sweep from a scalar node.
    pub fn backward(&self, output: NodeId) -> Result<Gradients> {
        let out = self.value(output);
        if !out.is_scalar() {
            return Err(DfpError::NonScalarOutput(out.shape().to_vec()));
        }
        let mut adj: Vec<Option<Tensor>> = (0..=output.0).map(|_| None).collect();
        adj[output.0] = Some(Tensor::filled(out.shape().to_vec(), 1.0));
        let mut grads = Gradients::default();

        for idx in (0..=output.0).rev() {
            let node = &self.nodes[idx];
            if !node.requires_grad {
                continue;
            }
            let Some(g) = adj[idx].take() else { continue };
            match &node.op {
                Op::Input => {}
                Op::Parameter(key) => match grads.grads.get_mut(key) {
                    Some(acc) => acc.add_assign(&g),
                    None => {
                        grads.grads.insert(*key, g);
                    }
                },
                Op::Affine { x, w, b } => {
                    let (xv, wv) = (self.value(*x), self.value(*w));
                    let (m, k, n) = (xv.rows(), xv.cols(), wv.cols());
                    if self.rg(*x) {
                        let mut dx = vec![0.0; m * k];
                        gemm(g.values(), false, wv.values(), true, m, n, k, &mut dx, false);
                        accumulate(&mut adj, *x, Tensor::matrix(m, k, dx)?);
                    }
                    if self.rg(*w) {
                        let mut dw = vec![0.0; k * n];
                        gemm(xv.values(), true, g.values(), false, k, m, n, &mut dw, false);
                        accumulate(&mut adj, *w, Tensor::new(wv.shape().to_vec(), dw)?);
                    }
                    if self.rg(*b) {
                        let mut db = vec![0.0; n];
                        for r in 0..m {
                            for (d, v) in db.iter_mut().zip(g.row(r)) {
                                *d += v;
                            }
                        }
                        accumulate(&mut adj, *b, Tensor::new(self.value(*b).shape().to_vec(), db)?);
                    }
                }
                Op::Relu(x) => {
                    let dx = self.value(*x).zip_map(&g, |v, d| if v > 0.0 { d } else { 0.0 });
                    accumulate(&mut adj, *x, dx);
                }
                Op::Concat(parts) => {
                    let rows = g.rows();
                    let total = g.cols();
                    let mut offset = 0;
                    for &p in parts {
                        let c = self.value(p).cols();
                        if self.rg(p) {
                            let mut dp = Vec::with_capacity(rows * c);
                            for r in 0..rows {
                                dp.extend_from_slice(&g.values()[r * total + offset..r * total + offset + c]);
                            }
                            accumulate(&mut adj, p, Tensor::matrix(rows, c, dp)?);
                        }
                        offset += c;
                    }
                }
                Op::Add(a, b) => {
                    if self.rg(*a) {
                        accumulate(&mut adj, *a, g.clone());
                    }
                    if self.rg(*b) {
                        accumulate(&mut adj, *b, g);
                    }
                }
                Op::Mul(a, b) => {
                    if self.rg(*a) {
                        accumulate(&mut adj, *a, g.zip_map(self.value(*b), |d, v| d * v));
                    }
                    if self.rg(*b) {
                        accumulate(&mut adj, *b, g.zip_map(self.value(*a), |d, v| d * v));
                    }
                }
                Op::Scale(a, s) => {
                    let s = *s;
                    accumulate(&mut adj, *a, g.map(|d| d * s));
                }
                Op::Square(a) => {
                    accumulate(&mut adj, *a, g.zip_map(self.value(*a), |d, v| 2.0 * v * d));
                }
                Op::ReduceMean(a) => {
                    let av = self.value(*a);
                    let d = g.item() / av.len() as f64;
                    accumulate(&mut adj, *a, Tensor::filled(av.shape().to_vec(), d));
                }
                Op::ReduceSum(a) => {
                    let av = self.value(*a);
                    accumulate(&mut adj, *a, Tensor::filled(av.shape().to_vec(), g.item()));
                }
                Op::BatchNorm {
                    x,
                    gamma,
                    beta,
                    batch,
                    normalized,
                    inv_std,
                    ..
                } => {
                    let (rows, f) = (g.rows(), g.cols());
                    let gv = self.value(*gamma).values();
                    let mut dbeta = vec![0.0; f];
                    let mut dgamma = vec![0.0; f];
                    for r in 0..rows {
                        for j in 0..f {
                            let d = g.values()[r * f + j];
                            dbeta[j] += d;
                            dgamma[j] += d * normalized.values()[r * f + j];
                        }
                    }
                    if self.rg(*x) {
                        let mut dx = vec![0.0; rows * f];
                        if *batch {
                            // dx = inv/B * (B*dxhat - sum(dxhat) - xhat * sum(dxhat*xhat))
                            let n = rows as f64;
                            for j in 0..f {
                                let sum_d = dbeta[j] * gv[j];
                                let sum_dx = dgamma[j] * gv[j];
                                for r in 0..rows {
                                    let dxhat = g.values()[r * f + j] * gv[j];
                                    let z = normalized.values()[r * f + j];
                                    dx[r * f + j] = inv_std[j] / n * (n * dxhat - sum_d - z * sum_dx);
                                }
                            }
                        } else {
                            for r in 0..rows {
                                for j in 0..f {
                                    dx[r * f + j] = g.values()[r * f + j] * gv[j] * inv_std[j];
                                }
                            }
                        }
                        accumulate(&mut adj, *x, Tensor::matrix(rows, f, dx)?);
                    }
                    if self.rg(*gamma) {
                        let shape = self.value(*gamma).shape().to_vec();
                        accumulate(&mut adj, *gamma, Tensor::new(shape, dgamma)?);
                    }
                    if self.rg(*beta) {
                        let shape = self.value(*beta).shape().to_vec();
                        accumulate(&mut adj, *beta, Tensor::new(shape, dbeta)?);
                    }
                }
            }
        }
        Ok(grads)
    }
}

fn accumulate(adj: &mut [Option<Tensor>], id: NodeId, g: Tensor) {
    match &mut adj[id.0] {
        Some(acc) => acc.add_assign(&g),
        slot @ None => *slot = Some(g),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    const K0: ParamKey = ParamKey { set: 0, index: 0 };

    #[test]
    fn affine_identity_returns_input() {
        let mut t = Tape::new();
        let x = t.input(Tensor::matrix(2, 2, vec![1.0, -2.0, 3.5, 4.0]).unwrap());
        let w = t.input(Tensor::matrix(2, 2, vec![1.0, 0.0, 0.0, 1.0]).unwrap());
        let b = t.input(Tensor::vector(vec![0.0, 0.0]));
        let y = t.affine(x, w, b).unwrap();
        assert_eq!(t.value(y).values(), &[1.0, -2.0, 3.5, 4.0]);
    }

    #[test]
    fn relu_and_reduce_mean() {
        let mut t = Tape::new();
        let x = t.input(Tensor::matrix(1, 2, vec![-1.0, 2.0]).unwrap());
        let r = t.relu(x);
        assert_eq!(t.value(r).values(), &[0.0, 2.0]);
        let y = t.input(Tensor::matrix(1, 4, vec![1.0, 2.0, 3.0, 6.0]).unwrap());
        let m = t.reduce_mean(y);
        assert_eq!(t.value(m).item(), 3.0);
    }

    #[test]
    fn affine_shape_mismatch_reported() {
        let mut t = Tape::new();
        let x = t.input(Tensor::zeros(vec![3, 2]));
        let w = t.input(Tensor::zeros(vec![3, 1]));
        let b = t.input(Tensor::zeros(vec![1]));
        assert!(matches!(t.affine(x, w, b), Err(DfpError::ShapeMismatch { op: "affine", .. })));
    }

    #[test]
    fn square_gradient() {
        let mut t = Tape::new();
        let w = t.parameter(K0, Tensor::scalar(3.0));
        let y = t.square(w);
        let g = t.backward(y).unwrap();
        assert_eq!(g.get(K0).unwrap().item(), 6.0);
    }

    #[test]
    fn mean_of_product_gradient() {
        let xs = vec![1.0, -2.0, 0.5, 4.0];
        let mut t = Tape::new();
        let w = t.parameter(K0, Tensor::matrix(1, 4, vec![0.3, 0.1, -0.7, 2.0]).unwrap());
        let x = t.input(Tensor::matrix(1, 4, xs.clone()).unwrap());
        let p = t.mul(w, x).unwrap();
        let y = t.reduce_mean(p);
        let g = t.backward(y).unwrap();
        for (gi, xi) in g.get(K0).unwrap().values().iter().zip(&xs) {
            assert!((gi - xi / 4.0).abs() < 1e-15);
        }
    }

    #[test]
    fn non_scalar_backward_rejected() {
        let mut t = Tape::new();
        let w = t.parameter(K0, Tensor::vector(vec![1.0, 2.0]));
        assert!(matches!(t.backward(w), Err(DfpError::NonScalarOutput(_))));
    }

    #[test]
    fn shared_parameter_gradients_accumulate() {
        // y = w*w built from two separate parameter nodes with the same key.
        let mut t = Tape::new();
        let a = t.parameter(K0, Tensor::scalar(2.5));
        let b = t.parameter(K0, Tensor::scalar(2.5));
        let y = t.mul(a, b).unwrap();
        assert_eq!(t.backward(y).unwrap().get(K0).unwrap().item(), 5.0);
    }

    #[test]
    fn frozen_batch_norm_is_affine_in_input() {
        // Superposition: f(x1 + x2) - f(0) == (f(x1) - f(0)) + (f(x2) - f(0)).
        let mean = [0.3, -1.0];
        let var = [2.0, 0.5];
        let eval = |x: Vec<f64>| {
            let mut t = Tape::new();
            let xn = t.input(Tensor::matrix(1, 2, x).unwrap());
            let g = t.input(Tensor::vector(vec![1.7, -0.4]));
            let b = t.input(Tensor::vector(vec![0.2, 0.9]));
            let y = t
                .batch_norm(xn, g, b, NormStats::Frozen { mean: &mean, var: &var }, 1e-3)
                .unwrap();
            t.value(y).values().to_vec()
        };
        let f0 = eval(vec![0.0, 0.0]);
        let f1 = eval(vec![1.2, -3.0]);
        let f2 = eval(vec![-0.5, 0.25]);
        let f12 = eval(vec![0.7, -2.75]);
        for j in 0..2 {
            assert!((f12[j] - f0[j] - (f1[j] - f0[j]) - (f2[j] - f0[j])).abs() < 1e-12);
        }
    }

    /// Builds a two-layer net with batch norm and returns the scalar loss.
    fn two_layer_loss(params: &[Tensor], x: &Tensor, batch_norm: bool) -> (Tape, NodeId) {
        let mut t = Tape::new();
        let p: Vec<NodeId> = params
            .iter()
            .enumerate()
            .map(|(i, v)| t.parameter(ParamKey { set: 0, index: i }, v.clone()))
            .collect();
        let xin = t.input(x.clone());
        let mut h = t.affine(xin, p[0], p[1]).unwrap();
        if batch_norm {
            h = t.batch_norm(h, p[4], p[5], NormStats::Batch, 1e-3).unwrap();
        }
        let h = t.relu(h);
        let o = t.affine(h, p[2], p[3]).unwrap();
        let sq = t.square(o);
        let l = t.reduce_mean(sq);
        let s = t.scale(o, 0.3);
        let m = t.reduce_sum(s);
        let y = t.add(l, m).unwrap();
        (t, y)
    }

    fn random_tensor(rng: &mut ChaCha8Rng, shape: Vec<usize>) -> Tensor {
        let n: usize = shape.iter().product();
        Tensor::new(shape, (0..n).map(|_| rng.random_range(-1.0..1.0)).collect()).unwrap()
    }

    #[test]
    fn two_layer_gradient_matches_central_differences() {
        for &bn in &[false, true] {
            let mut rng = ChaCha8Rng::seed_from_u64(7);
            let params = vec![
                random_tensor(&mut rng, vec![3, 4]),
                random_tensor(&mut rng, vec![4]),
                random_tensor(&mut rng, vec![4, 2]),
                random_tensor(&mut rng, vec![2]),
                random_tensor(&mut rng, vec![4]),
                random_tensor(&mut rng, vec![4]),
            ];
            let x = random_tensor(&mut rng, vec![5, 3]);
            let (tape, y) = two_layer_loss(&params, &x, bn);
            let grads = tape.backward(y).unwrap();
            let step = 1e-5;
            for (pi, p) in params.iter().enumerate() {
                if !bn && pi >= 4 {
                    continue;
                }
                let g = grads.get(ParamKey { set: 0, index: pi }).unwrap();
                for e in 0..p.len() {
                    let mut plus = params.clone();
                    plus[pi].values_mut()[e] += step;
                    let mut minus = params.clone();
                    minus[pi].values_mut()[e] -= step;
                    let (tp, yp) = two_layer_loss(&plus, &x, bn);
                    let (tm, ym) = two_layer_loss(&minus, &x, bn);
                    let fd = (tp.value(yp).item() - tm.value(ym).item()) / (2.0 * step);
                    let an = g.values()[e];
                    let rel = (fd - an).abs() / an.abs().max(fd.abs()).max(1e-8);
                    assert!(
                        rel <= 1e-5 || (fd - an).abs() < 1e-9,
                        "bn={bn} param {pi}[{e}]: analytic {an} vs fd {fd}"
                    );
                }
            }
        }
    }
}
