use super::{mismatch, Tensor, TensorError};

/// Handle to a value recorded on a [`Tape`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Var(usize);

impl Var {
    pub fn index(self) -> usize {
        self.0
    }
}

#[derive(Debug, Clone)]
enum Op {
    Leaf,
    Add(Var, Var),
    /// `b` broadcast over the leading dimensions of `a`.
    AddBroadcast(Var, Var),
    Mul(Var, Var),
    MulBroadcast(Var, Var),
    Scale(Var, f64),
    MatMul { a: Var, b: Var, shared_rhs: bool },
    Transpose(Var),
    Permute(Var, Vec<usize>),
    Reshape(Var),
    Softmax(Var, usize),
    LayerNorm { x: Var, normalized: Vec<f64>, inv_std: Vec<f64> },
    Gelu(Var),
    Relu(Var),
    Tanh(Var),
    Sigmoid(Var),
    Embedding { table: Var, indices: Vec<usize> },
    CrossEntropy { logits: Var, targets: Vec<Option<usize>>, probs: Vec<f64>, count: usize },
    Concat(Vec<Var>),
    Narrow { x: Var, start: usize },
    Select { x: Var, axis: usize, index: usize },
    Sum(Var),
    Mean(Var),
}

#[derive(Debug, Clone)]
struct Node {
    value: Tensor,
    op: Op,
    requires_grad: bool,
}

/// Records operations in execution order, which is also a topological order.
#[derive(Debug, Default, Clone)]
pub struct Tape {
    nodes: Vec<Node>,
}

/// Gradients of a scalar loss with respect to every recorded node.
#[derive(Debug, Clone)]
pub struct Gradients {
    grads: Vec<Option<Tensor>>,
    shapes: Vec<Vec<usize>>,
}

impl Gradients {
    /// `None` when the node did not contribute to the loss.
    pub fn get(&self, var: Var) -> Option<&Tensor> {
        self.grads.get(var.0).and_then(Option::as_ref)
    }

    /// Gradient of `var`, zeros if it did not contribute.
    pub fn get_or_zeros(&self, var: Var) -> Tensor {
        self.get(var)
            .cloned()
            .unwrap_or_else(|| Tensor::zeros(&self.shapes[var.0]))
    }

    pub fn take_or_zeros(&mut self, var: Var) -> Tensor {
        self.grads[var.0]
            .take()
            .unwrap_or_else(|| Tensor::zeros(&self.shapes[var.0]))
    }
}

fn numel(shape: &[usize]) -> usize {
    shape.iter().product()
}

fn is_suffix(full: &[usize], tail: &[usize]) -> bool {
    tail.len() <= full.len() && full[full.len() - tail.len()..] == *tail
}

/// `c[m×n] += a[m×k] · b[k×n]`
fn gemm(m: usize, k: usize, n: usize, a: &[f64], b: &[f64], c: &mut [f64]) {
    for i in 0..m {
        let c_row = &mut c[i * n..(i + 1) * n];
        for p in 0..k {
            let a_ip = a[i * k + p];
            if a_ip == 0.0 {
                continue;
            }
            let b_row = &b[p * n..(p + 1) * n];
            for (c_ij, &b_pj) in c_row.iter_mut().zip(b_row) {
                *c_ij += a_ip * b_pj;
            }
        }
    }
}

/// `da[m×k] += dc[m×n] · b[k×n]ᵀ`
fn gemm_a_bt(m: usize, k: usize, n: usize, dc: &[f64], b: &[f64], da: &mut [f64]) {
    for i in 0..m {
        let dc_row = &dc[i * n..(i + 1) * n];
        for p in 0..k {
            let b_row = &b[p * n..(p + 1) * n];
            da[i * k + p] += dc_row.iter().zip(b_row).map(|(x, y)| x * y).sum::<f64>();
        }
    }
}

/// `db[k×n] += a[m×k]ᵀ · dc[m×n]`
fn gemm_at_b(m: usize, k: usize, n: usize, a: &[f64], dc: &[f64], db: &mut [f64]) {
    for i in 0..m {
        let dc_row = &dc[i * n..(i + 1) * n];
        for p in 0..k {
            let a_ip = a[i * k + p];
            if a_ip == 0.0 {
                continue;
            }
            let db_row = &mut db[p * n..(p + 1) * n];
            for (d, &g) in db_row.iter_mut().zip(dc_row) {
                *d += a_ip * g;
            }
        }
    }
}

fn transpose_last2(shape: &[usize], data: &[f64]) -> Vec<f64> {
    let r = shape.len();
    let (rows, cols) = (shape[r - 2], shape[r - 1]);
    let batch = numel(&shape[..r - 2]);
    let mut out = vec![0.0; data.len()];
    for b in 0..batch {
        let off = b * rows * cols;
        for i in 0..rows {
            for j in 0..cols {
                out[off + j * rows + i] = data[off + i * cols + j];
            }
        }
    }
    out
}

fn strides(shape: &[usize]) -> Vec<usize> {
    let mut s = vec![1; shape.len()];
    for d in (0..shape.len().saturating_sub(1)).rev() {
        s[d] = s[d + 1] * shape[d + 1];
    }
    s
}

/// Copies `data` (of `shape`) into the layout given by permuting its axes.
fn permute_data(shape: &[usize], data: &[f64], axes: &[usize]) -> (Vec<usize>, Vec<f64>) {
    let in_strides = strides(shape);
    let out_shape: Vec<usize> = axes.iter().map(|&a| shape[a]).collect();
    let src_strides: Vec<usize> = axes.iter().map(|&a| in_strides[a]).collect();
    let mut out = Vec::with_capacity(data.len());
    let mut idx = vec![0usize; out_shape.len()];
    let mut src = 0usize;
    for _ in 0..data.len() {
        out.push(data[src]);
        for d in (0..idx.len()).rev() {
            idx[d] += 1;
            src += src_strides[d];
            if idx[d] < out_shape[d] {
                break;
            }
            src -= src_strides[d] * out_shape[d];
            idx[d] = 0;
        }
    }
    (out_shape, out)
}

/// Splits a shape around `axis` into (outer, extent, inner) sizes.
fn around_axis(shape: &[usize], axis: usize) -> (usize, usize, usize) {
    (numel(&shape[..axis]), shape[axis], numel(&shape[axis + 1..]))
}

const FRAC_1_SQRT_2PI: f64 = 0.398_942_280_401_432_7;

fn gelu(x: f64) -> f64 {
    0.5 * x * (1.0 + libm::erf(x * std::f64::consts::FRAC_1_SQRT_2))
}

fn gelu_grad(x: f64) -> f64 {
    0.5 * (1.0 + libm::erf(x * std::f64::consts::FRAC_1_SQRT_2))
        + x * FRAC_1_SQRT_2PI * (-0.5 * x * x).exp()
}

fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
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

    pub fn value(&self, var: Var) -> &Tensor {
        &self.nodes[var.0].value
    }

    pub fn shape(&self, var: Var) -> &[usize] {
        self.nodes[var.0].value.shape()
    }

    fn push(&mut self, value: Tensor, op: Op, requires_grad: bool) -> Var {
        self.nodes.push(Node {
            value,
            op,
            requires_grad,
        });
        Var(self.nodes.len() - 1)
    }

    fn push_checked(
        &mut self,
        name: &'static str,
        value: Tensor,
        op: Op,
        inputs: &[Var],
    ) -> Result<Var, TensorError> {
        if !value.is_finite() {
            return Err(TensorError::NonFinite(name));
        }
        let requires_grad = inputs.iter().any(|v| self.nodes[v.0].requires_grad);
        Ok(self.push(value, op, requires_grad))
    }

    fn rg(&self, var: Var) -> bool {
        self.nodes[var.0].requires_grad
    }

    /// A differentiable input (model parameter).
    pub fn leaf(&mut self, value: Tensor) -> Var {
        self.push(value, Op::Leaf, true)
    }

    /// An input that never receives a gradient.
    pub fn constant(&mut self, value: Tensor) -> Var {
        self.push(value, Op::Leaf, false)
    }

    /// Elementwise sum. `b` may also match a trailing suffix of `a`'s shape,
    /// in which case it is broadcast over the leading dimensions.
    pub fn add(&mut self, a: Var, b: Var) -> Result<Var, TensorError> {
        let (va, vb) = (self.value(a), self.value(b));
        if va.shape() == vb.shape() {
            let data = va.data().iter().zip(vb.data()).map(|(x, y)| x + y).collect();
            let out = Tensor::new(va.shape().to_vec(), data)?;
            self.push_checked("add", out, Op::Add(a, b), &[a, b])
        } else if is_suffix(va.shape(), vb.shape()) {
            let n = vb.len();
            let data = va
                .data()
                .iter()
                .enumerate()
                .map(|(i, x)| x + vb.data()[i % n])
                .collect();
            let out = Tensor::new(va.shape().to_vec(), data)?;
            self.push_checked("add", out, Op::AddBroadcast(a, b), &[a, b])
        } else {
            Err(mismatch("add", vb.shape(), format!("{:?} or a suffix of it", va.shape())))
        }
    }

    /// Elementwise product with the same broadcasting rule as [`Tape::add`].
    pub fn mul(&mut self, a: Var, b: Var) -> Result<Var, TensorError> {
        let (va, vb) = (self.value(a), self.value(b));
        if va.shape() == vb.shape() {
            let data = va.data().iter().zip(vb.data()).map(|(x, y)| x * y).collect();
            let out = Tensor::new(va.shape().to_vec(), data)?;
            self.push_checked("mul", out, Op::Mul(a, b), &[a, b])
        } else if is_suffix(va.shape(), vb.shape()) {
            let n = vb.len();
            let data = va
                .data()
                .iter()
                .enumerate()
                .map(|(i, x)| x * vb.data()[i % n])
                .collect();
            let out = Tensor::new(va.shape().to_vec(), data)?;
            self.push_checked("mul", out, Op::MulBroadcast(a, b), &[a, b])
        } else {
            Err(mismatch("mul", vb.shape(), format!("{:?} or a suffix of it", va.shape())))
        }
    }

    pub fn scale(&mut self, a: Var, c: f64) -> Result<Var, TensorError> {
        let va = self.value(a);
        let out = Tensor::new(va.shape().to_vec(), va.data().iter().map(|x| x * c).collect())?;
        self.push_checked("scale", out, Op::Scale(a, c), &[a])
    }

    /// Matrix product over the last two dimensions.
    ///
    /// `a: [.., m, k]` with either `b: [k, n]` (shared across the leading
    /// dimensions of `a`) or `b: [.., k, n]` with the same leading dimensions.
    pub fn matmul(&mut self, a: Var, b: Var) -> Result<Var, TensorError> {
        let (va, vb) = (self.value(a), self.value(b));
        let (sa, sb) = (va.shape(), vb.shape());
        if sa.len() < 2 || sb.len() < 2 {
            return Err(mismatch("matmul", if sa.len() < 2 { sa } else { sb }, "rank >= 2"));
        }
        let (m, k) = (sa[sa.len() - 2], sa[sa.len() - 1]);
        let (kb, n) = (sb[sb.len() - 2], sb[sb.len() - 1]);
        if k != kb {
            return Err(mismatch("matmul", sb, format!("[{k}, _] to match {sa:?}")));
        }
        let shared_rhs = sb.len() == 2;
        if !shared_rhs && sa[..sa.len() - 2] != sb[..sb.len() - 2] {
            return Err(mismatch("matmul", sb, format!("leading dims {:?}", &sa[..sa.len() - 2])));
        }
        let batch = numel(&sa[..sa.len() - 2]);
        let mut out_shape = sa[..sa.len() - 2].to_vec();
        out_shape.extend([m, n]);
        let mut out = vec![0.0; batch * m * n];
        if shared_rhs {
            gemm(batch * m, k, n, va.data(), vb.data(), &mut out);
        } else {
            for bi in 0..batch {
                gemm(
                    m,
                    k,
                    n,
                    &va.data()[bi * m * k..(bi + 1) * m * k],
                    &vb.data()[bi * k * n..(bi + 1) * k * n],
                    &mut out[bi * m * n..(bi + 1) * m * n],
                );
            }
        }
        let out = Tensor::new(out_shape, out)?;
        self.push_checked("matmul", out, Op::MatMul { a, b, shared_rhs }, &[a, b])
    }

    /// Swaps the last two dimensions.
    pub fn transpose(&mut self, a: Var) -> Result<Var, TensorError> {
        let va = self.value(a);
        let r = va.rank();
        if r < 2 {
            return Err(mismatch("transpose", va.shape(), "rank >= 2"));
        }
        let mut shape = va.shape().to_vec();
        shape.swap(r - 2, r - 1);
        let out = Tensor::new(shape, transpose_last2(va.shape(), va.data()))?;
        self.push_checked("transpose", out, Op::Transpose(a), &[a])
    }

    /// Reorders axes: output axis `d` is input axis `axes[d]`.
    pub fn permute(&mut self, a: Var, axes: &[usize]) -> Result<Var, TensorError> {
        let va = self.value(a);
        let mut seen = axes.to_vec();
        seen.sort_unstable();
        if seen != (0..va.rank()).collect::<Vec<_>>() {
            return Err(mismatch("permute", va.shape(), format!("a permutation matching {axes:?}")));
        }
        let (shape, data) = permute_data(va.shape(), va.data(), axes);
        let out = Tensor::new(shape, data)?;
        self.push_checked("permute", out, Op::Permute(a, axes.to_vec()), &[a])
    }

    pub fn reshape(&mut self, a: Var, shape: &[usize]) -> Result<Var, TensorError> {
        let va = self.value(a);
        if numel(shape) != va.len() {
            return Err(mismatch("reshape", va.shape(), format!("{} elements for {shape:?}", numel(shape))));
        }
        let out = Tensor::new(shape.to_vec(), va.data().to_vec())?;
        self.push_checked("reshape", out, Op::Reshape(a), &[a])
    }

    pub fn softmax(&mut self, a: Var, axis: usize) -> Result<Var, TensorError> {
        let va = self.value(a);
        if axis >= va.rank() {
            return Err(mismatch("softmax", va.shape(), format!("an axis < rank for axis {axis}")));
        }
        let (outer, extent, inner) = around_axis(va.shape(), axis);
        let x = va.data();
        let mut y = vec![0.0; x.len()];
        for o in 0..outer {
            for i in 0..inner {
                let at = |j: usize| (o * extent + j) * inner + i;
                let max = (0..extent).map(|j| x[at(j)]).fold(f64::NEG_INFINITY, f64::max);
                let mut total = 0.0;
                for j in 0..extent {
                    let e = (x[at(j)] - max).exp();
                    y[at(j)] = e;
                    total += e;
                }
                for j in 0..extent {
                    y[at(j)] /= total;
                }
            }
        }
        let out = Tensor::new(va.shape().to_vec(), y)?;
        self.push_checked("softmax", out, Op::Softmax(a, axis), &[a])
    }

    /// Normalizes over the last axis to zero mean and unit variance
    /// (biased variance, `eps` added inside the square root). No affine terms.
    pub fn layer_norm(&mut self, a: Var, eps: f64) -> Result<Var, TensorError> {
        let va = self.value(a);
        let width = *va.shape().last().ok_or_else(|| mismatch("layer_norm", va.shape(), "rank >= 1"))?;
        let rows = va.len() / width;
        let x = va.data();
        let mut normalized = vec![0.0; x.len()];
        let mut inv_std = Vec::with_capacity(rows);
        for r in 0..rows {
            let row = &x[r * width..(r + 1) * width];
            let mean = row.iter().sum::<f64>() / width as f64;
            let var = row.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / width as f64;
            let s = 1.0 / (var + eps).sqrt();
            for (o, v) in normalized[r * width..(r + 1) * width].iter_mut().zip(row) {
                *o = (v - mean) * s;
            }
            inv_std.push(s);
        }
        let out = Tensor::new(va.shape().to_vec(), normalized.clone())?;
        self.push_checked("layer_norm", out, Op::LayerNorm { x: a, normalized, inv_std }, &[a])
    }

    fn unary(&mut self, name: &'static str, a: Var, f: impl Fn(f64) -> f64, op: Op) -> Result<Var, TensorError> {
        let va = self.value(a);
        let out = Tensor::new(va.shape().to_vec(), va.data().iter().map(|&x| f(x)).collect())?;
        self.push_checked(name, out, op, &[a])
    }

    /// GELU, exact erf form.
    pub fn gelu(&mut self, a: Var) -> Result<Var, TensorError> {
        self.unary("gelu", a, gelu, Op::Gelu(a))
    }

    pub fn relu(&mut self, a: Var) -> Result<Var, TensorError> {
        self.unary("relu", a, |x| x.max(0.0), Op::Relu(a))
    }

    pub fn tanh(&mut self, a: Var) -> Result<Var, TensorError> {
        self.unary("tanh", a, f64::tanh, Op::Tanh(a))
    }

    pub fn sigmoid(&mut self, a: Var) -> Result<Var, TensorError> {
        self.unary("sigmoid", a, sigmoid, Op::Sigmoid(a))
    }

    /// Gathers rows of `table: [v, d]`; the output has shape `index_shape + [d]`.
    pub fn embedding(&mut self, table: Var, indices: &[usize], index_shape: &[usize]) -> Result<Var, TensorError> {
        let vt = self.value(table);
        if vt.rank() != 2 {
            return Err(mismatch("embedding", vt.shape(), "[vocab, dim]"));
        }
        if numel(index_shape) != indices.len() {
            return Err(mismatch("embedding", index_shape, format!("{} indices", indices.len())));
        }
        let (rows, dim) = (vt.shape()[0], vt.shape()[1]);
        let mut data = Vec::with_capacity(indices.len() * dim);
        for &i in indices {
            if i >= rows {
                return Err(TensorError::IndexOutOfRange { op: "embedding", index: i, extent: rows });
            }
            data.extend_from_slice(vt.row(i));
        }
        let mut shape = index_shape.to_vec();
        shape.push(dim);
        let out = Tensor::new(shape, data)?;
        self.push_checked(
            "embedding",
            out,
            Op::Embedding { table, indices: indices.to_vec() },
            &[table],
        )
    }

    /// Mean negative log-likelihood over rows of `logits: [n, c]` that carry
    /// a target; rows with `None` are ignored.
    pub fn cross_entropy(&mut self, logits: Var, targets: &[Option<usize>]) -> Result<Var, TensorError> {
        let vl = self.value(logits);
        if vl.rank() != 2 || vl.shape()[0] != targets.len() {
            return Err(mismatch("cross_entropy", vl.shape(), format!("[{}, classes]", targets.len())));
        }
        let c = vl.shape()[1];
        let count = targets.iter().flatten().count();
        if count == 0 {
            return Err(TensorError::NoTargets);
        }
        let mut probs = vec![0.0; vl.len()];
        let mut total = 0.0;
        for (r, target) in targets.iter().enumerate() {
            let Some(t) = *target else { continue };
            if t >= c {
                return Err(TensorError::IndexOutOfRange { op: "cross_entropy", index: t, extent: c });
            }
            let row = vl.row(r);
            let max = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            let lse = max + row.iter().map(|x| (x - max).exp()).sum::<f64>().ln();
            total += lse - row[t];
            for (p, x) in probs[r * c..(r + 1) * c].iter_mut().zip(row) {
                *p = (x - lse).exp();
            }
        }
        let out = Tensor::scalar(total / count as f64);
        self.push_checked(
            "cross_entropy",
            out,
            Op::CrossEntropy { logits, targets: targets.to_vec(), probs, count },
            &[logits],
        )
    }

    /// Concatenates along the last axis; leading dimensions must agree.
    pub fn concat(&mut self, parts: &[Var]) -> Result<Var, TensorError> {
        let first = parts.first().ok_or_else(|| mismatch("concat", &[], "at least one input"))?;
        let lead = self.value(*first).shape();
        let lead = lead[..lead.len() - 1].to_vec();
        let rows = numel(&lead);
        let mut widths = Vec::with_capacity(parts.len());
        for p in parts {
            let s = self.value(*p).shape();
            if s.len() != lead.len() + 1 || s[..lead.len()] != lead[..] {
                return Err(mismatch("concat", s, format!("leading dims {lead:?}")));
            }
            widths.push(s[s.len() - 1]);
        }
        let total: usize = widths.iter().sum();
        let mut data = Vec::with_capacity(rows * total);
        for r in 0..rows {
            for (p, &w) in parts.iter().zip(&widths) {
                data.extend_from_slice(&self.value(*p).data()[r * w..(r + 1) * w]);
            }
        }
        let mut shape = lead;
        shape.push(total);
        let out = Tensor::new(shape, data)?;
        self.push_checked("concat", out, Op::Concat(parts.to_vec()), parts)
    }

    /// Columns `start..start + len` of the last axis.
    pub fn narrow(&mut self, a: Var, start: usize, len: usize) -> Result<Var, TensorError> {
        let va = self.value(a);
        let w = *va.shape().last().unwrap_or(&0);
        if len == 0 || start + len > w {
            return Err(mismatch("narrow", va.shape(), format!("last extent >= {}", start + len)));
        }
        let rows = va.len() / w;
        let mut data = Vec::with_capacity(rows * len);
        for r in 0..rows {
            data.extend_from_slice(&va.data()[r * w + start..r * w + start + len]);
        }
        let mut shape = va.shape().to_vec();
        *shape.last_mut().unwrap() = len;
        let out = Tensor::new(shape, data)?;
        self.push_checked("narrow", out, Op::Narrow { x: a, start }, &[a])
    }

    /// Picks position `index` along `axis`, dropping that axis.
    pub fn select(&mut self, a: Var, axis: usize, index: usize) -> Result<Var, TensorError> {
        let va = self.value(a);
        if axis >= va.rank() || va.rank() < 2 {
            return Err(mismatch("select", va.shape(), format!("rank >= 2 with axis {axis}")));
        }
        let (outer, extent, inner) = around_axis(va.shape(), axis);
        if index >= extent {
            return Err(TensorError::IndexOutOfRange { op: "select", index, extent });
        }
        let mut data = Vec::with_capacity(outer * inner);
        for o in 0..outer {
            let off = (o * extent + index) * inner;
            data.extend_from_slice(&va.data()[off..off + inner]);
        }
        let mut shape = va.shape().to_vec();
        shape.remove(axis);
        let out = Tensor::new(shape, data)?;
        self.push_checked("select", out, Op::Select { x: a, axis, index }, &[a])
    }

    pub fn sum(&mut self, a: Var) -> Result<Var, TensorError> {
        let total = self.value(a).data().iter().sum();
        self.push_checked("sum", Tensor::scalar(total), Op::Sum(a), &[a])
    }

    pub fn mean(&mut self, a: Var) -> Result<Var, TensorError> {
        let va = self.value(a);
        let m = va.data().iter().sum::<f64>() / va.len() as f64;
        self.push_checked("mean", Tensor::scalar(m), Op::Mean(a), &[a])
    }

    /// Reverse sweep from a single-element `loss`.
    pub fn backward(&self, loss: Var) -> Result<Gradients, TensorError> {
        let lv = self.value(loss);
        if lv.len() != 1 {
            return Err(TensorError::NotScalarLoss(lv.shape().to_vec()));
        }
        let mut grads: Vec<Option<Tensor>> = vec![None; self.nodes.len()];
        grads[loss.0] = Some(Tensor::full(lv.shape(), 1.0));
        for i in (0..=loss.0).rev() {
            let node = &self.nodes[i];
            if !node.requires_grad {
                continue;
            }
            let Some(g) = grads[i].take() else { continue };
            self.backward_node(node, &g, &mut grads);
            grads[i] = Some(g);
        }
        Ok(Gradients {
            grads,
            shapes: self.nodes.iter().map(|n| n.value.shape().to_vec()).collect(),
        })
    }

    fn backward_node(&self, node: &Node, g: &Tensor, grads: &mut [Option<Tensor>]) {
        let gd = g.data();
        let mut acc = |v: Var, f: &mut dyn FnMut(&mut [f64])| {
            if !self.rg(v) {
                return;
            }
            let slot = grads[v.0].get_or_insert_with(|| Tensor::zeros(self.value(v).shape()));
            f(slot.data_mut());
        };
        match &node.op {
            Op::Leaf => {}
            Op::Add(a, b) => {
                acc(*a, &mut |d| d.iter_mut().zip(gd).for_each(|(d, g)| *d += g));
                acc(*b, &mut |d| d.iter_mut().zip(gd).for_each(|(d, g)| *d += g));
            }
            Op::AddBroadcast(a, b) => {
                acc(*a, &mut |d| d.iter_mut().zip(gd).for_each(|(d, g)| *d += g));
                acc(*b, &mut |d| {
                    let n = d.len();
                    gd.iter().enumerate().for_each(|(i, g)| d[i % n] += g);
                });
            }
            Op::Mul(a, b) => {
                let (va, vb) = (self.value(*a).data(), self.value(*b).data());
                acc(*a, &mut |d| (0..d.len()).for_each(|i| d[i] += gd[i] * vb[i]));
                acc(*b, &mut |d| (0..d.len()).for_each(|i| d[i] += gd[i] * va[i]));
            }
            Op::MulBroadcast(a, b) => {
                let (va, vb) = (self.value(*a).data(), self.value(*b).data());
                let n = vb.len();
                acc(*a, &mut |d| (0..d.len()).for_each(|i| d[i] += gd[i] * vb[i % n]));
                acc(*b, &mut |d| (0..gd.len()).for_each(|i| d[i % n] += gd[i] * va[i]));
            }
            Op::Scale(a, c) => acc(*a, &mut |d| d.iter_mut().zip(gd).for_each(|(d, g)| *d += c * g)),
            Op::MatMul { a, b, shared_rhs } => {
                let (va, vb) = (self.value(*a), self.value(*b));
                let sa = va.shape();
                let (m, k) = (sa[sa.len() - 2], sa[sa.len() - 1]);
                let n = vb.shape()[vb.rank() - 1];
                let batch = numel(&sa[..sa.len() - 2]);
                if *shared_rhs {
                    acc(*a, &mut |d| gemm_a_bt(batch * m, k, n, gd, vb.data(), d));
                    acc(*b, &mut |d| gemm_at_b(batch * m, k, n, va.data(), gd, d));
                } else {
                    acc(*a, &mut |d| {
                        for bi in 0..batch {
                            gemm_a_bt(
                                m,
                                k,
                                n,
                                &gd[bi * m * n..(bi + 1) * m * n],
                                &vb.data()[bi * k * n..(bi + 1) * k * n],
                                &mut d[bi * m * k..(bi + 1) * m * k],
                            );
                        }
                    });
                    acc(*b, &mut |d| {
                        for bi in 0..batch {
                            gemm_at_b(
                                m,
                                k,
                                n,
                                &va.data()[bi * m * k..(bi + 1) * m * k],
                                &gd[bi * m * n..(bi + 1) * m * n],
                                &mut d[bi * k * n..(bi + 1) * k * n],
                            );
                        }
                    });
                }
            }
            Op::Transpose(a) => {
                let back = transpose_last2(g.shape(), gd);
                acc(*a, &mut |d| d.iter_mut().zip(&back).for_each(|(d, g)| *d += g));
            }
            Op::Permute(a, axes) => {
                let mut inverse = vec![0; axes.len()];
                for (d, &ax) in axes.iter().enumerate() {
                    inverse[ax] = d;
                }
                let (_, back) = permute_data(g.shape(), gd, &inverse);
                acc(*a, &mut |d| d.iter_mut().zip(&back).for_each(|(d, g)| *d += g));
            }
            Op::Reshape(a) => acc(*a, &mut |d| d.iter_mut().zip(gd).for_each(|(d, g)| *d += g)),
            Op::Softmax(a, axis) => {
                let y = node.value.data();
                let (outer, extent, inner) = around_axis(node.value.shape(), *axis);
                acc(*a, &mut |d| {
                    for o in 0..outer {
                        for i in 0..inner {
                            let at = |j: usize| (o * extent + j) * inner + i;
                            let dot: f64 = (0..extent).map(|j| gd[at(j)] * y[at(j)]).sum();
                            for j in 0..extent {
                                d[at(j)] += y[at(j)] * (gd[at(j)] - dot);
                            }
                        }
                    }
                });
            }
            Op::LayerNorm { x, normalized, inv_std } => {
                let w = *g.shape().last().unwrap();
                acc(*x, &mut |d| {
                    for (r, s) in inv_std.iter().enumerate() {
                        let gr = &gd[r * w..(r + 1) * w];
                        let xr = &normalized[r * w..(r + 1) * w];
                        let mean_g = gr.iter().sum::<f64>() / w as f64;
                        let mean_gx = gr.iter().zip(xr).map(|(a, b)| a * b).sum::<f64>() / w as f64;
                        for j in 0..w {
                            d[r * w + j] += s * (gr[j] - mean_g - xr[j] * mean_gx);
                        }
                    }
                });
            }
            Op::Gelu(a) => {
                let x = self.value(*a).data();
                acc(*a, &mut |d| (0..d.len()).for_each(|i| d[i] += gd[i] * gelu_grad(x[i])));
            }
            Op::Relu(a) => {
                let x = self.value(*a).data();
                acc(*a, &mut |d| (0..d.len()).for_each(|i| if x[i] > 0.0 { d[i] += gd[i] }));
            }
            Op::Tanh(a) => {
                let y = node.value.data();
                acc(*a, &mut |d| (0..d.len()).for_each(|i| d[i] += gd[i] * (1.0 - y[i] * y[i])));
            }
            Op::Sigmoid(a) => {
                let y = node.value.data();
                acc(*a, &mut |d| (0..d.len()).for_each(|i| d[i] += gd[i] * y[i] * (1.0 - y[i])));
            }
            Op::Embedding { table, indices } => {
                let dim = self.value(*table).shape()[1];
                acc(*table, &mut |d| {
                    for (r, &i) in indices.iter().enumerate() {
                        for j in 0..dim {
                            d[i * dim + j] += gd[r * dim + j];
                        }
                    }
                });
            }
            Op::CrossEntropy { logits, targets, probs, count } => {
                let c = self.value(*logits).shape()[1];
                let scale = gd[0] / *count as f64;
                acc(*logits, &mut |d| {
                    for (r, t) in targets.iter().enumerate() {
                        let Some(t) = *t else { continue };
                        for j in 0..c {
                            d[r * c + j] += scale * probs[r * c + j];
                        }
                        d[r * c + t] -= scale;
                    }
                });
            }
            Op::Concat(parts) => {
                let total = *g.shape().last().unwrap();
                let rows = g.len() / total;
                let mut offset = 0;
                for p in parts {
                    let w = *self.value(*p).shape().last().unwrap();
                    acc(*p, &mut |d| {
                        for r in 0..rows {
                            for j in 0..w {
                                d[r * w + j] += gd[r * total + offset + j];
                            }
                        }
                    });
                    offset += w;
                }
            }
            Op::Narrow { x, start } => {
                let w = *self.value(*x).shape().last().unwrap();
                let len = *g.shape().last().unwrap();
                acc(*x, &mut |d| {
                    for r in 0..g.len() / len {
                        for j in 0..len {
                            d[r * w + start + j] += gd[r * len + j];
                        }
                    }
                });
            }
            Op::Select { x, axis, index } => {
                let (outer, extent, inner) = around_axis(self.value(*x).shape(), *axis);
                acc(*x, &mut |d| {
                    for o in 0..outer {
                        let off = (o * extent + index) * inner;
                        for i in 0..inner {
                            d[off + i] += gd[o * inner + i];
                        }
                    }
                });
            }
            Op::Sum(a) => acc(*a, &mut |d| d.iter_mut().for_each(|d| *d += gd[0])),
            Op::Mean(a) => {
                let n = self.value(*a).len() as f64;
                acc(*a, &mut |d| d.iter_mut().for_each(|d| *d += gd[0] / n));
            }
        }
    }
}
