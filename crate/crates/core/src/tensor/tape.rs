use std::borrow::Cow;
use std::collections::HashMap;

use super::{gemm, ParamId, ParamStore, Result, Tensor, TensorError};

/// Handle to a value recorded on a [`Tape`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Var(usize);

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum UnaryKind {
    Relu,
    Sigmoid,
    /// tanh approximation.
    Gelu,
    Identity,
    /// Inverted dropout. In eval mode (`train == false`) this is the identity.
    Dropout {
        p: f64,
        train: bool,
    },
}

#[derive(Debug)]
enum Op {
    Leaf,
    Param(ParamId),
    MatMul(Var, Var),
    Add(Var, Var),
    Sub(Var, Var),
    Mul(Var, Var),
    AddBias(Var, Var),
    Scale(Var, f64),
    Relu(Var),
    Sigmoid(Var),
    Gelu(Var),
    Dropout(Var, Vec<f64>),
    Softmax {
        x: Var,
        outer: usize,
        len: usize,
        inner: usize,
    },
    LayerNorm {
        x: Var,
        gamma: Var,
        beta: Var,
        xhat: Vec<f64>,
        inv_std: Vec<f64>,
    },
    Mse(Var, Var),
    Sum(Var),
    Mean(Var),
    Transpose(Var),
    GatherRows(Var, Vec<usize>),
    ConcatRows(Vec<Var>),
    ConcatCols(Vec<Var>),
    SliceRows(Var, usize),
    SliceCols(Var, usize),
}

struct Node<'p> {
    value: Cow<'p, Tensor>,
    op: Op,
    tracked: bool,
}

/// Records a forward computation for reverse-mode differentiation.
///
/// Parameters are borrowed from their [`ParamStore`] for the lifetime of the
/// tape, so building a tape never copies model weights.
pub struct Tape<'p> {
    nodes: Vec<Node<'p>>,
    dropout_seed: u64,
    dropout_calls: u64,
}

impl Default for Tape<'_> {
    fn default() -> Self {
        Self::new()
    }
}

impl<'p> Tape<'p> {
    pub fn new() -> Self {
        Self::with_seed(0)
    }

    /// Tape whose train-mode dropout masks derive from `seed` and the call order.
    pub fn with_seed(seed: u64) -> Self {
        Self {
            nodes: Vec::new(),
            dropout_seed: seed,
            dropout_calls: 0,
        }
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn value(&self, v: Var) -> &Tensor {
        &self.nodes[v.0].value
    }

    fn push(&mut self, value: Cow<'p, Tensor>, op: Op, tracked: bool) -> Var {
        self.nodes.push(Node { value, op, tracked });
        Var(self.nodes.len() - 1)
    }

    fn push_owned(&mut self, shape: Vec<usize>, data: Vec<f64>, op: Op, tracked: bool) -> Var {
        let t = Tensor::new(shape, data).expect("op produced inconsistent shape");
        self.push(Cow::Owned(t), op, tracked)
    }

    fn tracked(&self, v: Var) -> bool {
        self.nodes[v.0].tracked
    }

    /// Owned leaf. Differentiable iff `tensor.requires_grad()`.
    pub fn constant(&mut self, tensor: Tensor) -> Var {
        let tracked = tensor.requires_grad();
        self.push(Cow::Owned(tensor), Op::Leaf, tracked)
    }

    /// Borrowed leaf. Differentiable iff `tensor.requires_grad()`.
    pub fn input(&mut self, tensor: &'p Tensor) -> Var {
        let tracked = tensor.requires_grad();
        self.push(Cow::Borrowed(tensor), Op::Leaf, tracked)
    }

    pub fn param(&mut self, store: &'p ParamStore, id: ParamId) -> Var {
        let t = store.get(id);
        self.push(Cow::Borrowed(t), Op::Param(id), t.requires_grad())
    }

    fn dims2(&self, op: &'static str, v: Var) -> Result<(usize, usize)> {
        self.value(v)
            .dims2()
            .ok_or_else(|| TensorError::dim(op, format!("expected 2-D, got {:?}", self.value(v).shape())))
    }

    pub fn matmul(&mut self, a: Var, b: Var) -> Result<Var> {
        let (m, k) = self.dims2("matmul", a)?;
        let (k2, n) = self.dims2("matmul", b)?;
        if k != k2 {
            return Err(TensorError::dim(
                "matmul",
                format!("inner dimensions {m}x{k} · {k2}x{n}"),
            ));
        }
        let mut out = vec![0.0; m * n];
        gemm(
            m,
            k,
            n,
            self.value(a).data(),
            false,
            self.value(b).data(),
            false,
            &mut out,
            0.0,
        );
        let tracked = self.tracked(a) || self.tracked(b);
        Ok(self.push_owned(vec![m, n], out, Op::MatMul(a, b), tracked))
    }

    fn same_shape(&self, op: &'static str, a: Var, b: Var) -> Result<()> {
        let (sa, sb) = (self.value(a).shape(), self.value(b).shape());
        if sa != sb {
            return Err(TensorError::dim(op, format!("{sa:?} vs {sb:?}")));
        }
        Ok(())
    }

    fn zip_with(&mut self, a: Var, b: Var, f: impl Fn(f64, f64) -> f64, op: Op) -> Var {
        let data = self
            .value(a)
            .data()
            .iter()
            .zip(self.value(b).data())
            .map(|(&x, &y)| f(x, y))
            .collect();
        let shape = self.value(a).shape().to_vec();
        let tracked = self.tracked(a) || self.tracked(b);
        self.push_owned(shape, data, op, tracked)
    }

    pub fn add(&mut self, a: Var, b: Var) -> Result<Var> {
        self.same_shape("add", a, b)?;
        Ok(self.zip_with(a, b, |x, y| x + y, Op::Add(a, b)))
    }

    pub fn sub(&mut self, a: Var, b: Var) -> Result<Var> {
        self.same_shape("sub", a, b)?;
        Ok(self.zip_with(a, b, |x, y| x - y, Op::Sub(a, b)))
    }

    pub fn mul(&mut self, a: Var, b: Var) -> Result<Var> {
        self.same_shape("mul", a, b)?;
        Ok(self.zip_with(a, b, |x, y| x * y, Op::Mul(a, b)))
    }

    /// Adds a 1-D `bias` along the last axis of `x`.
    pub fn add_bias(&mut self, x: Var, bias: Var) -> Result<Var> {
        let n = *self.value(x).shape().last().unwrap();
        let b = self.value(bias);
        if b.ndim() != 1 || b.len() != n {
            return Err(TensorError::dim(
                "add_bias",
                format!("bias {:?} for last axis {n}", b.shape()),
            ));
        }
        let bd = b.data();
        let data = self
            .value(x)
            .data()
            .chunks(n)
            .flat_map(|row| row.iter().zip(bd).map(|(v, b)| v + b))
            .collect();
        let shape = self.value(x).shape().to_vec();
        let tracked = self.tracked(x) || self.tracked(bias);
        Ok(self.push_owned(shape, data, Op::AddBias(x, bias), tracked))
    }

    pub fn scale(&mut self, x: Var, c: f64) -> Var {
        let t = self.value(x);
        let data = t.data().iter().map(|v| v * c).collect();
        let shape = t.shape().to_vec();
        let tracked = self.tracked(x);
        self.push_owned(shape, data, Op::Scale(x, c), tracked)
    }

    fn map(&mut self, x: Var, f: impl Fn(f64) -> f64, op: Op) -> Var {
        let t = self.value(x);
        let data = t.data().iter().map(|&v| f(v)).collect();
        let shape = t.shape().to_vec();
        let tracked = self.tracked(x);
        self.push_owned(shape, data, op, tracked)
    }

    pub fn apply_unary(&mut self, kind: UnaryKind, x: Var) -> Result<Var> {
        Ok(match kind {
            UnaryKind::Identity => x,
            UnaryKind::Relu => self.map(x, |v| v.max(0.0), Op::Relu(x)),
            UnaryKind::Sigmoid => self.map(x, sigmoid, Op::Sigmoid(x)),
            UnaryKind::Gelu => self.map(x, gelu, Op::Gelu(x)),
            UnaryKind::Dropout { p, train } => {
                if !(0.0..1.0).contains(&p) {
                    return Err(TensorError::Parameter {
                        op: "dropout",
                        detail: format!("p = {p} outside [0, 1)"),
                    });
                }
                if !train || p == 0.0 {
                    return Ok(x);
                }
                let call = self.dropout_calls;
                self.dropout_calls += 1;
                let keep = 1.0 / (1.0 - p);
                let mask: Vec<f64> = (0..self.value(x).len() as u64)
                    .map(|i| {
                        if counter_uniform(self.dropout_seed, call, i) < p {
                            0.0
                        } else {
                            keep
                        }
                    })
                    .collect();
                let t = self.value(x);
                let data = t.data().iter().zip(&mask).map(|(v, m)| v * m).collect();
                let shape = t.shape().to_vec();
                let tracked = self.tracked(x);
                self.push_owned(shape, data, Op::Dropout(x, mask), tracked)
            }
        })
    }

    pub fn relu(&mut self, x: Var) -> Var {
        self.map(x, |v| v.max(0.0), Op::Relu(x))
    }

    pub fn sigmoid(&mut self, x: Var) -> Var {
        self.map(x, sigmoid, Op::Sigmoid(x))
    }

    pub fn gelu(&mut self, x: Var) -> Var {
        self.map(x, gelu, Op::Gelu(x))
    }

    pub fn dropout(&mut self, x: Var, p: f64, train: bool) -> Result<Var> {
        self.apply_unary(UnaryKind::Dropout { p, train }, x)
    }

    /// Numerically stable softmax along `axis`.
    pub fn softmax(&mut self, x: Var, axis: usize) -> Result<Var> {
        let t = self.value(x);
        let shape = t.shape().to_vec();
        if axis >= shape.len() {
            return Err(TensorError::dim("softmax", format!("axis {axis} for shape {shape:?}")));
        }
        let outer: usize = shape[..axis].iter().product();
        let len = shape[axis];
        let inner: usize = shape[axis + 1..].iter().product();
        let src = t.data();
        let mut out = vec![0.0; src.len()];
        for o in 0..outer {
            for i in 0..inner {
                let base = o * len * inner + i;
                let idx = |j: usize| base + j * inner;
                let max = (0..len).map(|j| src[idx(j)]).fold(f64::NEG_INFINITY, f64::max);
                let mut total = 0.0;
                for j in 0..len {
                    let e = (src[idx(j)] - max).exp();
                    out[idx(j)] = e;
                    total += e;
                }
                for j in 0..len {
                    out[idx(j)] /= total;
                }
            }
        }
        let tracked = self.tracked(x);
        Ok(self.push_owned(shape, out, Op::Softmax { x, outer, len, inner }, tracked))
    }

    /// Normalizes over the last axis, then applies `gamma * x̂ + beta`.
    pub fn layer_norm(&mut self, x: Var, gamma: Var, beta: Var, eps: f64) -> Result<Var> {
        if eps.is_nan() || eps <= 0.0 {
            return Err(TensorError::Parameter {
                op: "layer_norm",
                detail: format!("eps = {eps} must be positive"),
            });
        }
        let t = self.value(x);
        let d = *t.shape().last().unwrap();
        for (what, v) in [("gamma", gamma), ("beta", beta)] {
            let p = self.value(v);
            if p.ndim() != 1 || p.len() != d {
                return Err(TensorError::dim(
                    "layer_norm",
                    format!("{what} {:?} for last axis {d}", p.shape()),
                ));
            }
        }
        let (g, b) = (self.value(gamma).data(), self.value(beta).data());
        let rows = t.len() / d;
        let mut xhat = vec![0.0; t.len()];
        let mut inv_std = vec![0.0; rows];
        let mut out = vec![0.0; t.len()];
        for (r, row) in t.data().chunks(d).enumerate() {
            let mean = row.iter().sum::<f64>() / d as f64;
            let var = row.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / d as f64;
            let is = 1.0 / (var + eps).sqrt();
            inv_std[r] = is;
            for j in 0..d {
                let h = (row[j] - mean) * is;
                xhat[r * d + j] = h;
                out[r * d + j] = g[j] * h + b[j];
            }
        }
        let shape = t.shape().to_vec();
        let tracked = self.tracked(x) || self.tracked(gamma) || self.tracked(beta);
        Ok(self.push_owned(
            shape,
            out,
            Op::LayerNorm {
                x,
                gamma,
                beta,
                xhat,
                inv_std,
            },
            tracked,
        ))
    }

    /// Mean of squared elementwise differences, as a scalar.
    pub fn mse_loss(&mut self, pred: Var, target: Var) -> Result<Var> {
        self.same_shape("mse_loss", pred, target)?;
        let (p, t) = (self.value(pred).data(), self.value(target).data());
        let loss = p.iter().zip(t).map(|(a, b)| (a - b) * (a - b)).sum::<f64>() / p.len() as f64;
        let tracked = self.tracked(pred) || self.tracked(target);
        Ok(self.push_owned(vec![1], vec![loss], Op::Mse(pred, target), tracked))
    }

    pub fn sum(&mut self, x: Var) -> Var {
        let s = self.value(x).data().iter().sum();
        let tracked = self.tracked(x);
        self.push_owned(vec![1], vec![s], Op::Sum(x), tracked)
    }

    pub fn mean(&mut self, x: Var) -> Var {
        let t = self.value(x);
        let s = t.data().iter().sum::<f64>() / t.len() as f64;
        let tracked = self.tracked(x);
        self.push_owned(vec![1], vec![s], Op::Mean(x), tracked)
    }

    pub fn transpose(&mut self, x: Var) -> Result<Var> {
        let (r, c) = self.dims2("transpose", x)?;
        let src = self.value(x).data();
        let mut out = vec![0.0; r * c];
        for i in 0..r {
            for j in 0..c {
                out[j * r + i] = src[i * c + j];
            }
        }
        let tracked = self.tracked(x);
        Ok(self.push_owned(vec![c, r], out, Op::Transpose(x), tracked))
    }

    /// Selects rows of a 2-D `table` (embedding lookup).
    pub fn gather_rows(&mut self, table: Var, ids: &[usize]) -> Result<Var> {
        let (rows, cols) = self.dims2("gather_rows", table)?;
        if ids.is_empty() {
            return Err(TensorError::dim("gather_rows", "no ids"));
        }
        if let Some(bad) = ids.iter().find(|&&i| i >= rows) {
            return Err(TensorError::dim(
                "gather_rows",
                format!("id {bad} out of range for {rows} rows"),
            ));
        }
        let t = self.value(table);
        let data = ids.iter().flat_map(|&i| t.row(i).iter().copied()).collect();
        let tracked = self.tracked(table);
        Ok(self.push_owned(
            vec![ids.len(), cols],
            data,
            Op::GatherRows(table, ids.to_vec()),
            tracked,
        ))
    }

    pub fn concat_rows(&mut self, parts: &[Var]) -> Result<Var> {
        let first = *parts
            .first()
            .ok_or_else(|| TensorError::dim("concat_rows", "nothing to concatenate"))?;
        let (_, cols) = self.dims2("concat_rows", first)?;
        let mut rows = 0;
        let mut data = Vec::new();
        for &p in parts {
            let (r, c) = self.dims2("concat_rows", p)?;
            if c != cols {
                return Err(TensorError::dim("concat_rows", format!("{c} vs {cols} columns")));
            }
            rows += r;
            data.extend_from_slice(self.value(p).data());
        }
        let tracked = parts.iter().any(|&p| self.tracked(p));
        Ok(self.push_owned(vec![rows, cols], data, Op::ConcatRows(parts.to_vec()), tracked))
    }

    pub fn concat_cols(&mut self, parts: &[Var]) -> Result<Var> {
        let first = *parts
            .first()
            .ok_or_else(|| TensorError::dim("concat_cols", "nothing to concatenate"))?;
        let (rows, _) = self.dims2("concat_cols", first)?;
        let mut widths = Vec::with_capacity(parts.len());
        for &p in parts {
            let (r, c) = self.dims2("concat_cols", p)?;
            if r != rows {
                return Err(TensorError::dim("concat_cols", format!("{r} vs {rows} rows")));
            }
            widths.push(c);
        }
        let cols: usize = widths.iter().sum();
        let mut data = Vec::with_capacity(rows * cols);
        for r in 0..rows {
            for &p in parts {
                data.extend_from_slice(self.value(p).row(r));
            }
        }
        let tracked = parts.iter().any(|&p| self.tracked(p));
        Ok(self.push_owned(vec![rows, cols], data, Op::ConcatCols(parts.to_vec()), tracked))
    }

    /// Rows `start..end` of a 2-D tensor.
    pub fn slice_rows(&mut self, x: Var, start: usize, end: usize) -> Result<Var> {
        let (rows, cols) = self.dims2("slice_rows", x)?;
        if start >= end || end > rows {
            return Err(TensorError::dim("slice_rows", format!("{start}..{end} of {rows}")));
        }
        let data = self.value(x).data()[start * cols..end * cols].to_vec();
        let tracked = self.tracked(x);
        Ok(self.push_owned(vec![end - start, cols], data, Op::SliceRows(x, start), tracked))
    }

    /// Columns `start..end` of a 2-D tensor.
    pub fn slice_cols(&mut self, x: Var, start: usize, end: usize) -> Result<Var> {
        let (rows, cols) = self.dims2("slice_cols", x)?;
        if start >= end || end > cols {
            return Err(TensorError::dim("slice_cols", format!("{start}..{end} of {cols}")));
        }
        let t = self.value(x);
        let data = (0..rows).flat_map(|r| t.row(r)[start..end].iter().copied()).collect();
        let tracked = self.tracked(x);
        Ok(self.push_owned(vec![rows, end - start], data, Op::SliceCols(x, start), tracked))
    }

    /// Back-propagates from a scalar `loss` through every tracked node.
    pub fn backward(&self, loss: Var) -> Result<Gradients> {
        let lv = self.value(loss);
        if lv.len() != 1 {
            return Err(TensorError::Contract(format!(
                "backward needs a scalar loss, got shape {:?}",
                lv.shape()
            )));
        }
        let mut grads: Vec<Option<Vec<f64>>> = vec![None; loss.0 + 1];
        grads[loss.0] = Some(vec![1.0]);
        let mut out = Gradients::default();

        for i in (0..=loss.0).rev() {
            let node = &self.nodes[i];
            if !node.tracked {
                continue;
            }
            let Some(g) = grads[i].take() else { continue };
            let mut send = |v: Var, delta: Vec<f64>| {
                if self.nodes[v.0].tracked {
                    accumulate(&mut grads[v.0], delta);
                }
            };
            let val = |v: Var| self.nodes[v.0].value.data();
            match &node.op {
                Op::Leaf => {
                    out.leaves.insert(i, g);
                }
                Op::Param(id) => {
                    out.params.push((*id, g));
                }
                Op::MatMul(a, b) => {
                    let (m, k) = self.value(*a).dims2().unwrap();
                    let n = self.value(*b).shape()[1];
                    if self.tracked(*a) {
                        let mut da = vec![0.0; m * k];
                        gemm(m, n, k, &g, false, val(*b), true, &mut da, 0.0);
                        send(*a, da);
                    }
                    if self.tracked(*b) {
                        let mut db = vec![0.0; k * n];
                        gemm(k, m, n, val(*a), true, &g, false, &mut db, 0.0);
                        send(*b, db);
                    }
                }
                Op::Add(a, b) => {
                    send(*b, g.clone());
                    send(*a, g);
                }
                Op::Sub(a, b) => {
                    send(*b, g.iter().map(|v| -v).collect());
                    send(*a, g);
                }
                Op::Mul(a, b) => {
                    let (av, bv) = (val(*a), val(*b));
                    send(*a, g.iter().zip(bv).map(|(g, y)| g * y).collect());
                    send(*b, g.iter().zip(av).map(|(g, x)| g * x).collect());
                }
                Op::AddBias(x, b) => {
                    let n = self.value(*b).len();
                    let mut db = vec![0.0; n];
                    for row in g.chunks(n) {
                        for (d, v) in db.iter_mut().zip(row) {
                            *d += v;
                        }
                    }
                    send(*b, db);
                    send(*x, g);
                }
                Op::Scale(x, c) => send(*x, g.iter().map(|v| v * c).collect()),
                Op::Relu(x) => send(
                    *x,
                    g.iter()
                        .zip(val(*x))
                        .map(|(g, &x)| if x > 0.0 { *g } else { 0.0 })
                        .collect(),
                ),
                Op::Sigmoid(x) => send(
                    *x,
                    g.iter()
                        .zip(node.value.data())
                        .map(|(g, y)| g * y * (1.0 - y))
                        .collect(),
                ),
                Op::Gelu(x) => send(*x, g.iter().zip(val(*x)).map(|(g, &x)| g * gelu_grad(x)).collect()),
                Op::Dropout(x, mask) => send(*x, g.iter().zip(mask).map(|(g, m)| g * m).collect()),
                Op::Softmax { x, outer, len, inner } => {
                    let y = node.value.data();
                    let mut dx = vec![0.0; y.len()];
                    for o in 0..*outer {
                        for c in 0..*inner {
                            let base = o * len * inner + c;
                            let dot: f64 = (0..*len).map(|j| g[base + j * inner] * y[base + j * inner]).sum();
                            for j in 0..*len {
                                let k = base + j * inner;
                                dx[k] = y[k] * (g[k] - dot);
                            }
                        }
                    }
                    send(*x, dx);
                }
                Op::LayerNorm {
                    x,
                    gamma,
                    beta,
                    xhat,
                    inv_std,
                } => {
                    let gam = val(*gamma);
                    let d = gam.len();
                    let mut dgamma = vec![0.0; d];
                    let mut dbeta = vec![0.0; d];
                    let mut dx = vec![0.0; g.len()];
                    for (r, (grow, hrow)) in g.chunks(d).zip(xhat.chunks(d)).enumerate() {
                        let mut mean_dh = 0.0;
                        let mut mean_dh_h = 0.0;
                        for j in 0..d {
                            dgamma[j] += grow[j] * hrow[j];
                            dbeta[j] += grow[j];
                            let dh = grow[j] * gam[j];
                            mean_dh += dh;
                            mean_dh_h += dh * hrow[j];
                        }
                        mean_dh /= d as f64;
                        mean_dh_h /= d as f64;
                        for j in 0..d {
                            let dh = grow[j] * gam[j];
                            dx[r * d + j] = inv_std[r] * (dh - mean_dh - hrow[j] * mean_dh_h);
                        }
                    }
                    send(*gamma, dgamma);
                    send(*beta, dbeta);
                    send(*x, dx);
                }
                Op::Mse(p, t) => {
                    let (pv, tv) = (val(*p), val(*t));
                    let s = 2.0 * g[0] / pv.len() as f64;
                    let dp: Vec<f64> = pv.iter().zip(tv).map(|(a, b)| s * (a - b)).collect();
                    send(*t, dp.iter().map(|v| -v).collect());
                    send(*p, dp);
                }
                Op::Sum(x) => send(*x, vec![g[0]; self.value(*x).len()]),
                Op::Mean(x) => {
                    let n = self.value(*x).len();
                    send(*x, vec![g[0] / n as f64; n]);
                }
                Op::Transpose(x) => {
                    let (r, c) = self.value(*x).dims2().unwrap();
                    let mut dx = vec![0.0; r * c];
                    for i in 0..r {
                        for j in 0..c {
                            dx[i * c + j] = g[j * r + i];
                        }
                    }
                    send(*x, dx);
                }
                Op::GatherRows(table, ids) => {
                    let t = self.value(*table);
                    let cols = t.shape()[1];
                    let mut dt = vec![0.0; t.len()];
                    for (k, &id) in ids.iter().enumerate() {
                        for j in 0..cols {
                            dt[id * cols + j] += g[k * cols + j];
                        }
                    }
                    send(*table, dt);
                }
                Op::ConcatRows(parts) => {
                    let mut offset = 0;
                    for &p in parts {
                        let n = self.value(p).len();
                        send(p, g[offset..offset + n].to_vec());
                        offset += n;
                    }
                }
                Op::ConcatCols(parts) => {
                    let cols = node.value.shape()[1];
                    let mut start = 0;
                    for &p in parts {
                        let (rows, w) = self.value(p).dims2().unwrap();
                        let dp = (0..rows)
                            .flat_map(|r| g[r * cols + start..r * cols + start + w].iter().copied())
                            .collect();
                        send(p, dp);
                        start += w;
                    }
                }
                Op::SliceRows(x, start) => {
                    let t = self.value(*x);
                    let cols = t.shape()[1];
                    let mut dx = vec![0.0; t.len()];
                    dx[start * cols..start * cols + g.len()].copy_from_slice(&g);
                    send(*x, dx);
                }
                Op::SliceCols(x, start) => {
                    let t = self.value(*x);
                    let cols = t.shape()[1];
                    let w = node.value.shape()[1];
                    let mut dx = vec![0.0; t.len()];
                    for (r, grow) in g.chunks(w).enumerate() {
                        dx[r * cols + start..r * cols + start + w].copy_from_slice(grow);
                    }
                    send(*x, dx);
                }
            }
        }
        Ok(out)
    }
}

fn accumulate(slot: &mut Option<Vec<f64>>, delta: Vec<f64>) {
    match slot {
        Some(acc) => acc.iter_mut().zip(&delta).for_each(|(a, d)| *a += d),
        None => *slot = Some(delta),
    }
}

/// Gradients produced by [`Tape::backward`].
#[derive(Debug, Default)]
pub struct Gradients {
    params: Vec<(ParamId, Vec<f64>)>,
    leaves: HashMap<usize, Vec<f64>>,
}

impl Gradients {
    /// Gradient per parameter reached from the loss. A parameter used several
    /// times on the tape appears once per use.
    pub fn params(&self) -> impl Iterator<Item = (ParamId, &[f64])> {
        self.params.iter().map(|(id, g)| (*id, g.as_slice()))
    }

    /// Gradient of a differentiable leaf created with [`Tape::constant`] or [`Tape::input`].
    pub fn of(&self, leaf: Var) -> Option<&[f64]> {
        self.leaves.get(&leaf.0).map(Vec::as_slice)
    }
}

fn sigmoid(v: f64) -> f64 {
    if v >= 0.0 {
        1.0 / (1.0 + (-v).exp())
    } else {
        let e = v.exp();
        e / (1.0 + e)
    }
}

const GELU_C: f64 = 0.797_884_560_802_865_4; // sqrt(2/pi)

fn gelu(x: f64) -> f64 {
    0.5 * x * (1.0 + (GELU_C * (x + 0.044715 * x * x * x)).tanh())
}

fn gelu_grad(x: f64) -> f64 {
    let t = (GELU_C * (x + 0.044715 * x * x * x)).tanh();
    0.5 * (1.0 + t) + 0.5 * x * (1.0 - t * t) * GELU_C * (1.0 + 3.0 * 0.044715 * x * x)
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Uniform draw in [0, 1) addressed by (seed, stream, index).
fn counter_uniform(seed: u64, stream: u64, index: u64) -> f64 {
    let key = splitmix64(seed ^ splitmix64(stream.wrapping_add(0x5851_F42D_4C95_7F2D)));
    (splitmix64(key ^ index) >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
}
