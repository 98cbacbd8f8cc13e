//! Reverse-mode differentiation over a flat op tape.
//!
//! Every forward op appends one node holding its output value; `backward`
//! replays the tape in reverse and accumulates gradients into every leaf
//! that was created with `requires_grad`. Tapes are cheap, single-use and
//! owned by one worker; parameters live outside and are bound as leaves
//! per tape.

use crate::scalar::Scalar;

use super::tensor::Tensor;
use super::NumericError;

/// Handle to a node on a [`Tape`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct TensorRef(pub(crate) usize);

#[derive(Debug, Clone)]
enum Op<S: Scalar> {
    Leaf,
    MatMul(TensorRef, TensorRef),
    Transpose(TensorRef),
    Add(TensorRef, TensorRef),
    Sub(TensorRef, TensorRef),
    Mul(TensorRef, TensorRef),
    Scale(TensorRef, S),
    AddScalar(TensorRef),
    AddBias(TensorRef, TensorRef),
    ConcatRows(TensorRef, TensorRef),
    ConcatCols(TensorRef, TensorRef),
    Relu(TensorRef),
    SoftmaxRows(TensorRef),
    LayerNorm {
        x: TensorRef,
        gain: TensorRef,
        bias: TensorRef,
        eps: S,
    },
    Mean(TensorRef),
    Sum(TensorRef),
    Square(TensorRef),
    Cosine(TensorRef, TensorRef),
    GatherRows(TensorRef, Vec<usize>),
}

struct Node<S: Scalar> {
    op: Op<S>,
    value: Tensor<S>,
    needs_grad: bool,
}

/// Recorded forward pass; see module docs.
pub struct Tape<S: Scalar> {
    nodes: Vec<Node<S>>,
}

/// Gradients produced by [`Tape::backward`], indexed by [`TensorRef`].
pub struct Gradients<S: Scalar> {
    grads: Vec<Option<Tensor<S>>>,
}

impl<S: Scalar> Gradients<S> {
    /// Gradient of the loss w.r.t. the given node.
    ///
    /// `Some` (possibly all-zero) for every `requires_grad` leaf, `None`
    /// for nodes that never tracked gradients.
    pub fn wrt(&self, r: TensorRef) -> Option<&Tensor<S>> {
        self.grads[r.0].as_ref()
    }
}

impl<S: Scalar> Default for Tape<S> {
    fn default() -> Self {
        Self::new()
    }
}

impl<S: Scalar> Tape<S> {
    pub fn new() -> Self {
        Self { nodes: Vec::new() }
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn value(&self, r: TensorRef) -> &Tensor<S> {
        &self.nodes[r.0].value
    }

    /// Single element of a scalar-valued node.
    pub fn item(&self, r: TensorRef) -> Result<S, NumericError> {
        self.nodes[r.0].value.item()
    }

    /// Place a tensor on the tape; gradient tracking follows
    /// `t.requires_grad`.
    pub fn leaf(&mut self, t: Tensor<S>) -> Result<TensorRef, NumericError> {
        if !t.all_finite() {
            return Err(NumericError::NonFinite { op: "leaf" });
        }
        let needs = t.requires_grad;
        Ok(self.push(Op::Leaf, t, needs))
    }

    /// Leaf that never tracks gradients.
    pub fn constant(&mut self, mut t: Tensor<S>) -> Result<TensorRef, NumericError> {
        t.requires_grad = false;
        self.leaf(t)
    }

    pub fn scalar(&mut self, v: S) -> Result<TensorRef, NumericError> {
        self.constant(Tensor::scalar(v))
    }

    fn push(&mut self, op: Op<S>, value: Tensor<S>, needs_grad: bool) -> TensorRef {
        self.nodes.push(Node {
            op,
            value,
            needs_grad,
        });
        TensorRef(self.nodes.len() - 1)
    }

    fn needs(&self, r: TensorRef) -> bool {
        self.nodes[r.0].needs_grad
    }

    fn record(
        &mut self,
        name: &'static str,
        op: Op<S>,
        value: Tensor<S>,
        needs_grad: bool,
    ) -> Result<TensorRef, NumericError> {
        if !value.all_finite() {
            return Err(NumericError::NonFinite { op: name });
        }
        Ok(self.push(op, value, needs_grad))
    }

    pub fn matmul(&mut self, a: TensorRef, b: TensorRef) -> Result<TensorRef, NumericError> {
        let (va, vb) = (self.value(a), self.value(b));
        if va.shape().len() != 2 || vb.shape().len() != 2 || va.cols() != vb.rows() {
            return Err(NumericError::ShapeMismatch {
                op: "matmul",
                detail: format!("{:?} x {:?}", va.shape(), vb.shape()),
            });
        }
        let out = matmul_values(va, vb);
        let needs = self.needs(a) || self.needs(b);
        self.record("matmul", Op::MatMul(a, b), out, needs)
    }

    pub fn transpose(&mut self, a: TensorRef) -> Result<TensorRef, NumericError> {
        let va = self.value(a);
        if va.shape().len() != 2 {
            return Err(NumericError::ShapeMismatch {
                op: "transpose",
                detail: format!("{:?}", va.shape()),
            });
        }
        let out = transpose_values(va);
        let needs = self.needs(a);
        self.record("transpose", Op::Transpose(a), out, needs)
    }

    fn zip_elementwise(
        &mut self,
        name: &'static str,
        a: TensorRef,
        b: TensorRef,
        f: impl Fn(S, S) -> S,
        op: Op<S>,
    ) -> Result<TensorRef, NumericError> {
        let (va, vb) = (self.value(a), self.value(b));
        if va.shape() != vb.shape() {
            return Err(NumericError::ShapeMismatch {
                op: name,
                detail: format!("{:?} vs {:?}", va.shape(), vb.shape()),
            });
        }
        let data = va
            .data()
            .iter()
            .zip(vb.data())
            .map(|(&x, &y)| f(x, y))
            .collect();
        let out = Tensor::new(va.shape().to_vec(), data).expect("same shape");
        let needs = self.needs(a) || self.needs(b);
        self.record(name, op, out, needs)
    }

    pub fn add(&mut self, a: TensorRef, b: TensorRef) -> Result<TensorRef, NumericError> {
        self.zip_elementwise("add", a, b, |x, y| x + y, Op::Add(a, b))
    }

    pub fn sub(&mut self, a: TensorRef, b: TensorRef) -> Result<TensorRef, NumericError> {
        self.zip_elementwise("sub", a, b, |x, y| x - y, Op::Sub(a, b))
    }

    pub fn mul(&mut self, a: TensorRef, b: TensorRef) -> Result<TensorRef, NumericError> {
        self.zip_elementwise("mul", a, b, |x, y| x * y, Op::Mul(a, b))
    }

    pub fn scale(&mut self, a: TensorRef, c: S) -> Result<TensorRef, NumericError> {
        let va = self.value(a);
        let data = va.data().iter().map(|&x| x * c).collect();
        let out = Tensor::new(va.shape().to_vec(), data).expect("same shape");
        let needs = self.needs(a);
        self.record("scale", Op::Scale(a, c), out, needs)
    }

    pub fn add_scalar(&mut self, a: TensorRef, c: S) -> Result<TensorRef, NumericError> {
        let va = self.value(a);
        let data = va.data().iter().map(|&x| x + c).collect();
        let out = Tensor::new(va.shape().to_vec(), data).expect("same shape");
        let needs = self.needs(a);
        self.record("add_scalar", Op::AddScalar(a), out, needs)
    }

    /// `x + b` per row: `x` is `[n, d]`, `b` is `[d]`.
    pub fn add_bias(&mut self, x: TensorRef, b: TensorRef) -> Result<TensorRef, NumericError> {
        let (vx, vb) = (self.value(x), self.value(b));
        if vx.shape().len() != 2 || vb.shape().len() != 1 || vx.cols() != vb.len() {
            return Err(NumericError::ShapeMismatch {
                op: "add_bias",
                detail: format!("{:?} + {:?}", vx.shape(), vb.shape()),
            });
        }
        let d = vx.cols();
        let data = vx
            .data()
            .iter()
            .enumerate()
            .map(|(i, &v)| v + vb.data()[i % d])
            .collect();
        let out = Tensor::new(vx.shape().to_vec(), data).expect("same shape");
        let needs = self.needs(x) || self.needs(b);
        self.record("add_bias", Op::AddBias(x, b), out, needs)
    }

    /// Stack two matrices with equal column counts, `a` on top.
    pub fn concat_rows(&mut self, a: TensorRef, b: TensorRef) -> Result<TensorRef, NumericError> {
        let (va, vb) = (self.value(a), self.value(b));
        if va.shape().len() != 2 || vb.shape().len() != 2 || va.cols() != vb.cols() {
            return Err(NumericError::ShapeMismatch {
                op: "concat_rows",
                detail: format!("{:?} over {:?}", va.shape(), vb.shape()),
            });
        }
        let mut data = va.data().to_vec();
        data.extend_from_slice(vb.data());
        let out = Tensor::matrix(va.rows() + vb.rows(), va.cols(), data)?;
        let needs = self.needs(a) || self.needs(b);
        self.record("concat_rows", Op::ConcatRows(a, b), out, needs)
    }

    /// Join two matrices with equal row counts side by side, `a` left.
    pub fn concat_cols(&mut self, a: TensorRef, b: TensorRef) -> Result<TensorRef, NumericError> {
        let (va, vb) = (self.value(a), self.value(b));
        if va.shape().len() != 2 || vb.shape().len() != 2 || va.rows() != vb.rows() {
            return Err(NumericError::ShapeMismatch {
                op: "concat_cols",
                detail: format!("{:?} next to {:?}", va.shape(), vb.shape()),
            });
        }
        let mut data = Vec::with_capacity(va.len() + vb.len());
        for r in 0..va.rows() {
            data.extend_from_slice(va.row(r));
            data.extend_from_slice(vb.row(r));
        }
        let out = Tensor::matrix(va.rows(), va.cols() + vb.cols(), data)?;
        let needs = self.needs(a) || self.needs(b);
        self.record("concat_cols", Op::ConcatCols(a, b), out, needs)
    }

    pub fn relu(&mut self, a: TensorRef) -> Result<TensorRef, NumericError> {
        let va = self.value(a);
        let data = va
            .data()
            .iter()
            .map(|&x| if x > S::zero() { x } else { S::zero() })
            .collect();
        let out = Tensor::new(va.shape().to_vec(), data).expect("same shape");
        let needs = self.needs(a);
        self.record("relu", Op::Relu(a), out, needs)
    }

    pub fn square(&mut self, a: TensorRef) -> Result<TensorRef, NumericError> {
        let va = self.value(a);
        let data = va.data().iter().map(|&x| x * x).collect();
        let out = Tensor::new(va.shape().to_vec(), data).expect("same shape");
        let needs = self.needs(a);
        self.record("square", Op::Square(a), out, needs)
    }

    /// Row-wise softmax; a vector is treated as a single row.
    pub fn softmax_rows(&mut self, a: TensorRef) -> Result<TensorRef, NumericError> {
        let va = self.value(a);
        let cols = va.cols();
        if cols == 0 {
            return Err(NumericError::ShapeMismatch {
                op: "softmax_rows",
                detail: "empty rows".into(),
            });
        }
        let mut data = Vec::with_capacity(va.len());
        for r in 0..va.rows() {
            let row = va.row(r);
            let max = row.iter().cloned().fold(S::neg_infinity(), S::max);
            let exps: Vec<S> = row.iter().map(|&x| (x - max).exp()).collect();
            let total: S = exps.iter().cloned().sum();
            data.extend(exps.into_iter().map(|e| e / total));
        }
        let out = Tensor::new(va.shape().to_vec(), data).expect("same shape");
        let needs = self.needs(a);
        self.record("softmax_rows", Op::SoftmaxRows(a), out, needs)
    }

    /// Row-wise layer normalization with trainable gain/bias of width `d`.
    ///
    /// Each row is centered and scaled to unit variance (`eps`-adjusted),
    /// then mapped through `gain .* xhat + bias`. A constant row normalizes
    /// to zero rather than erroring.
    pub fn layer_norm(
        &mut self,
        x: TensorRef,
        gain: TensorRef,
        bias: TensorRef,
        eps: S,
    ) -> Result<TensorRef, NumericError> {
        let (vx, vg, vb) = (self.value(x), self.value(gain), self.value(bias));
        let d = vx.cols();
        if vg.shape() != [d] || vb.shape() != [d] || d == 0 {
            return Err(NumericError::ShapeMismatch {
                op: "layer_norm",
                detail: format!(
                    "x {:?}, gain {:?}, bias {:?}",
                    vx.shape(),
                    vg.shape(),
                    vb.shape()
                ),
            });
        }
        let mut data = Vec::with_capacity(vx.len());
        for r in 0..vx.rows() {
            let row = vx.row(r);
            let (xhat, _) = normalize_row(row, eps);
            for (j, xh) in xhat.iter().enumerate() {
                data.push(vg.data()[j] * *xh + vb.data()[j]);
            }
        }
        let out = Tensor::new(vx.shape().to_vec(), data).expect("same shape");
        let needs = self.needs(x) || self.needs(gain) || self.needs(bias);
        self.record("layer_norm", Op::LayerNorm { x, gain, bias, eps }, out, needs)
    }

    pub fn mean(&mut self, a: TensorRef) -> Result<TensorRef, NumericError> {
        let va = self.value(a);
        if va.is_empty() {
            return Err(NumericError::ShapeMismatch {
                op: "mean",
                detail: "empty tensor".into(),
            });
        }
        let n = S::from_double(va.len() as f64);
        let total: S = va.data().iter().cloned().sum();
        let needs = self.needs(a);
        self.record("mean", Op::Mean(a), Tensor::scalar(total / n), needs)
    }

    pub fn sum(&mut self, a: TensorRef) -> Result<TensorRef, NumericError> {
        let va = self.value(a);
        let total: S = va.data().iter().cloned().sum();
        let needs = self.needs(a);
        self.record("sum", Op::Sum(a), Tensor::scalar(total), needs)
    }

    /// Cosine similarity of two equal-shaped tensors viewed as flat vectors.
    pub fn cosine(&mut self, a: TensorRef, b: TensorRef) -> Result<TensorRef, NumericError> {
        let (va, vb) = (self.value(a), self.value(b));
        if va.len() != vb.len() || va.is_empty() {
            return Err(NumericError::ShapeMismatch {
                op: "cosine",
                detail: format!("{:?} vs {:?}", va.shape(), vb.shape()),
            });
        }
        let value = cosine_value(va.data(), vb.data())?;
        let needs = self.needs(a) || self.needs(b);
        self.record("cosine", Op::Cosine(a, b), Tensor::scalar(value), needs)
    }

    /// Select rows of a matrix by index; indices may repeat.
    pub fn gather_rows(
        &mut self,
        x: TensorRef,
        rows: &[usize],
    ) -> Result<TensorRef, NumericError> {
        let vx = self.value(x);
        if vx.shape().len() != 2 {
            return Err(NumericError::ShapeMismatch {
                op: "gather_rows",
                detail: format!("{:?}", vx.shape()),
            });
        }
        let n = vx.rows();
        if let Some(&bad) = rows.iter().find(|&&r| r >= n) {
            return Err(NumericError::ShapeMismatch {
                op: "gather_rows",
                detail: format!("row {bad} out of {n}"),
            });
        }
        let mut data = Vec::with_capacity(rows.len() * vx.cols());
        for &r in rows {
            data.extend_from_slice(vx.row(r));
        }
        let out = Tensor::matrix(rows.len(), vx.cols(), data)?;
        let needs = self.needs(x);
        self.record("gather_rows", Op::GatherRows(x, rows.to_vec()), out, needs)
    }

    /// Reverse-mode gradients of a scalar loss for every grad-tracked leaf.
    ///
    /// Leaves not reachable from the loss keep an all-zero gradient.
    pub fn backward(&self, loss: TensorRef) -> Result<Gradients<S>, NumericError> {
        let lv = &self.nodes[loss.0].value;
        if !lv.is_scalar() {
            return Err(NumericError::NonScalar {
                shape: lv.shape().to_vec(),
            });
        }
        let mut grads: Vec<Option<Tensor<S>>> = vec![None; self.nodes.len()];
        for (i, node) in self.nodes.iter().enumerate() {
            if matches!(node.op, Op::Leaf) && node.value.requires_grad {
                grads[i] = Some(Tensor::zeros(node.value.shape().to_vec()));
            }
        }
        accumulate(&mut grads, loss, &Tensor::scalar(S::one()), self);

        for i in (0..=loss.0).rev() {
            let node = &self.nodes[i];
            if !node.needs_grad {
                continue;
            }
            let Some(g) = grads[i].clone() else { continue };
            self.step_back(i, &g, &mut grads);
        }
        Ok(Gradients { grads })
    }

    fn step_back(&self, i: usize, g: &Tensor<S>, grads: &mut Vec<Option<Tensor<S>>>) {
        let node = &self.nodes[i];
        match &node.op {
            Op::Leaf => {}
            Op::MatMul(a, b) => {
                let (va, vb) = (self.value(*a), self.value(*b));
                if self.needs(*a) {
                    let da = matmul_values(g, &transpose_values(vb));
                    accumulate(grads, *a, &da, self);
                }
                if self.needs(*b) {
                    let db = matmul_values(&transpose_values(va), g);
                    accumulate(grads, *b, &db, self);
                }
            }
            Op::Transpose(a) => {
                if self.needs(*a) {
                    accumulate(grads, *a, &transpose_values(g), self);
                }
            }
            Op::Add(a, b) => {
                if self.needs(*a) {
                    accumulate(grads, *a, g, self);
                }
                if self.needs(*b) {
                    accumulate(grads, *b, g, self);
                }
            }
            Op::Sub(a, b) => {
                if self.needs(*a) {
                    accumulate(grads, *a, g, self);
                }
                if self.needs(*b) {
                    let neg = map_values(g, |x| -x);
                    accumulate(grads, *b, &neg, self);
                }
            }
            Op::Mul(a, b) => {
                if self.needs(*a) {
                    let da = zip_values(g, self.value(*b), |x, y| x * y);
                    accumulate(grads, *a, &da, self);
                }
                if self.needs(*b) {
                    let db = zip_values(g, self.value(*a), |x, y| x * y);
                    accumulate(grads, *b, &db, self);
                }
            }
            Op::Scale(a, c) => {
                if self.needs(*a) {
                    let da = map_values(g, |x| x * *c);
                    accumulate(grads, *a, &da, self);
                }
            }
            Op::AddScalar(a) => {
                if self.needs(*a) {
                    accumulate(grads, *a, g, self);
                }
            }
            Op::AddBias(x, b) => {
                if self.needs(*x) {
                    accumulate(grads, *x, g, self);
                }
                if self.needs(*b) {
                    let d = self.value(*b).len();
                    let mut db = vec![S::zero(); d];
                    for (i, &gv) in g.data().iter().enumerate() {
                        db[i % d] += gv;
                    }
                    accumulate(grads, *b, &Tensor::vector(db), self);
                }
            }
            Op::ConcatRows(a, b) => {
                let ra = self.value(*a).rows();
                let cols = g.cols();
                if self.needs(*a) {
                    let da =
                        Tensor::matrix(ra, cols, g.data()[..ra * cols].to_vec()).expect("split");
                    accumulate(grads, *a, &da, self);
                }
                if self.needs(*b) {
                    let rb = g.rows() - ra;
                    let db =
                        Tensor::matrix(rb, cols, g.data()[ra * cols..].to_vec()).expect("split");
                    accumulate(grads, *b, &db, self);
                }
            }
            Op::ConcatCols(a, b) => {
                let ca = self.value(*a).cols();
                let cb = g.cols() - ca;
                if self.needs(*a) {
                    let mut da = Vec::with_capacity(g.rows() * ca);
                    for r in 0..g.rows() {
                        da.extend_from_slice(&g.row(r)[..ca]);
                    }
                    accumulate(grads, *a, &Tensor::matrix(g.rows(), ca, da).expect("split"), self);
                }
                if self.needs(*b) {
                    let mut db = Vec::with_capacity(g.rows() * cb);
                    for r in 0..g.rows() {
                        db.extend_from_slice(&g.row(r)[ca..]);
                    }
                    accumulate(grads, *b, &Tensor::matrix(g.rows(), cb, db).expect("split"), self);
                }
            }
            Op::Relu(a) => {
                if self.needs(*a) {
                    let da = zip_values(g, self.value(*a), |gv, x| {
                        if x > S::zero() {
                            gv
                        } else {
                            S::zero()
                        }
                    });
                    accumulate(grads, *a, &da, self);
                }
            }
            Op::Square(a) => {
                if self.needs(*a) {
                    let two = S::from_double(2.0);
                    let da = zip_values(g, self.value(*a), |gv, x| two * x * gv);
                    accumulate(grads, *a, &da, self);
                }
            }
            Op::SoftmaxRows(a) => {
                if self.needs(*a) {
                    let y = &node.value;
                    let cols = y.cols();
                    let mut da = Vec::with_capacity(y.len());
                    for r in 0..y.rows() {
                        let yr = y.row(r);
                        let gr = &g.data()[r * cols..(r + 1) * cols];
                        let dot: S = yr.iter().zip(gr).map(|(&yv, &gv)| yv * gv).sum();
                        da.extend(yr.iter().zip(gr).map(|(&yv, &gv)| yv * (gv - dot)));
                    }
                    let da = Tensor::new(y.shape().to_vec(), da).expect("same shape");
                    accumulate(grads, *a, &da, self);
                }
            }
            Op::LayerNorm { x, gain, bias, eps } => {
                let vx = self.value(*x);
                let vg = self.value(*gain);
                let d = vx.cols();
                let dn = S::from_double(d as f64);
                let mut dx = Tensor::zeros(vx.shape().to_vec());
                let mut dgain = vec![S::zero(); d];
                let mut dbias = vec![S::zero(); d];
                for r in 0..vx.rows() {
                    let row = vx.row(r);
                    let (xhat, inv) = normalize_row(row, *eps);
                    let gr = &g.data()[r * d..(r + 1) * d];
                    let mut m1 = S::zero();
                    let mut m2 = S::zero();
                    let mut dxhat = vec![S::zero(); d];
                    for j in 0..d {
                        dgain[j] += gr[j] * xhat[j];
                        dbias[j] += gr[j];
                        dxhat[j] = gr[j] * vg.data()[j];
                        m1 += dxhat[j];
                        m2 += dxhat[j] * xhat[j];
                    }
                    m1 = m1 / dn;
                    m2 = m2 / dn;
                    for j in 0..d {
                        dx.data_mut()[r * d + j] = inv * (dxhat[j] - m1 - xhat[j] * m2);
                    }
                }
                if self.needs(*x) {
                    accumulate(grads, *x, &dx, self);
                }
                if self.needs(*gain) {
                    accumulate(grads, *gain, &Tensor::vector(dgain), self);
                }
                if self.needs(*bias) {
                    accumulate(grads, *bias, &Tensor::vector(dbias), self);
                }
            }
            Op::Mean(a) => {
                if self.needs(*a) {
                    let va = self.value(*a);
                    let c = g.data()[0] / S::from_double(va.len() as f64);
                    let da = Tensor::new(va.shape().to_vec(), vec![c; va.len()]).expect("fill");
                    accumulate(grads, *a, &da, self);
                }
            }
            Op::Sum(a) => {
                if self.needs(*a) {
                    let va = self.value(*a);
                    let c = g.data()[0];
                    let da = Tensor::new(va.shape().to_vec(), vec![c; va.len()]).expect("fill");
                    accumulate(grads, *a, &da, self);
                }
            }
            Op::Cosine(a, b) => {
                let va = self.value(*a);
                let vb = self.value(*b);
                let na = l2_norm(va.data());
                let nb = l2_norm(vb.data());
                let c = node.value.data()[0];
                let gv = g.data()[0];
                if self.needs(*a) {
                    let da: Vec<S> = va
                        .data()
                        .iter()
                        .zip(vb.data())
                        .map(|(&ai, &bi)| gv * (bi / (na * nb) - c * ai / (na * na)))
                        .collect();
                    accumulate(grads, *a, &Tensor::new(va.shape().to_vec(), da).expect("same"), self);
                }
                if self.needs(*b) {
                    let db: Vec<S> = va
                        .data()
                        .iter()
                        .zip(vb.data())
                        .map(|(&ai, &bi)| gv * (ai / (na * nb) - c * bi / (nb * nb)))
                        .collect();
                    accumulate(grads, *b, &Tensor::new(vb.shape().to_vec(), db).expect("same"), self);
                }
            }
            Op::GatherRows(x, rows) => {
                if self.needs(*x) {
                    let vx = self.value(*x);
                    let cols = vx.cols();
                    let mut dx = Tensor::zeros(vx.shape().to_vec());
                    for (k, &r) in rows.iter().enumerate() {
                        for j in 0..cols {
                            dx.data_mut()[r * cols + j] += g.data()[k * cols + j];
                        }
                    }
                    accumulate(grads, *x, &dx, self);
                }
            }
        }
    }
}

fn accumulate<S: Scalar>(
    grads: &mut Vec<Option<Tensor<S>>>,
    r: TensorRef,
    delta: &Tensor<S>,
    tape: &Tape<S>,
) {
    if !tape.needs(r) {
        return;
    }
    match &mut grads[r.0] {
        Some(existing) => {
            for (e, &d) in existing.data_mut().iter_mut().zip(delta.data()) {
                *e += d;
            }
        }
        slot @ None => *slot = Some(delta.clone()),
    }
}

fn matmul_values<S: Scalar>(a: &Tensor<S>, b: &Tensor<S>) -> Tensor<S> {
    let (n, k, m) = (a.rows(), a.cols(), b.cols());
    let mut out = vec![S::zero(); n * m];
    for i in 0..n {
        let ar = a.row(i);
        for (kk, &av) in ar.iter().enumerate().take(k) {
            if av == S::zero() {
                continue;
            }
            let br = b.row(kk);
            let or = &mut out[i * m..(i + 1) * m];
            for (o, &bv) in or.iter_mut().zip(br) {
                *o += av * bv;
            }
        }
    }
    Tensor::matrix(n, m, out).expect("matmul shape")
}

fn transpose_values<S: Scalar>(a: &Tensor<S>) -> Tensor<S> {
    let (r, c) = (a.rows(), a.cols());
    let mut out = vec![S::zero(); r * c];
    for i in 0..r {
        for j in 0..c {
            out[j * r + i] = a.get2(i, j);
        }
    }
    Tensor::matrix(c, r, out).expect("transpose shape")
}

fn map_values<S: Scalar>(a: &Tensor<S>, f: impl Fn(S) -> S) -> Tensor<S> {
    Tensor::new(a.shape().to_vec(), a.data().iter().map(|&x| f(x)).collect()).expect("same shape")
}

fn zip_values<S: Scalar>(a: &Tensor<S>, b: &Tensor<S>, f: impl Fn(S, S) -> S) -> Tensor<S> {
    let data = a
        .data()
        .iter()
        .zip(b.data())
        .map(|(&x, &y)| f(x, y))
        .collect();
    Tensor::new(a.shape().to_vec(), data).expect("same shape")
}

fn l2_norm<S: Scalar>(v: &[S]) -> S {
    v.iter().map(|&x| x * x).sum::<S>().sqrt()
}

/// Center and variance-normalize one row; returns `(xhat, 1/sqrt(var+eps))`.
fn normalize_row<S: Scalar>(row: &[S], eps: S) -> (Vec<S>, S) {
    let dn = S::from_double(row.len() as f64);
    let mean = row.iter().cloned().sum::<S>() / dn;
    let var = row.iter().map(|&x| (x - mean) * (x - mean)).sum::<S>() / dn;
    let inv = S::one() / (var + eps).sqrt();
    (row.iter().map(|&x| (x - mean) * inv).collect(), inv)
}

/// Plain (non-tape) cosine similarity with the degenerate-vector guard.
pub fn cosine_value<S: Scalar>(a: &[S], b: &[S]) -> Result<S, NumericError> {
    let (na, nb) = (l2_norm(a), l2_norm(b));
    let tiny = S::from_double(1e-12);
    if na < tiny || nb < tiny {
        return Err(NumericError::DegenerateVector);
    }
    let dot: S = a.iter().zip(b).map(|(&x, &y)| x * y).sum();
    Ok(dot / (na * nb))
}
