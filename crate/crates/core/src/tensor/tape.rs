//! Tape-based reverse-mode automatic differentiation over small dense
//! vectors and matrices.
//!
//! Every primitive appends a node whose id is larger than the ids of its
//! inputs, so the tape is topologically ordered by construction and backward
//! is a single reverse sweep. Leaves can borrow shared buffers (parameters,
//! stored embeddings) without copying.

use std::sync::Arc;

use super::TensorError;
use crate::Real;

/// Row-major shape; vectors are `rows x 1`, scalars `1 x 1`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Shape {
    pub rows: usize,
    pub cols: usize,
}

impl Shape {
    pub const SCALAR: Shape = Shape { rows: 1, cols: 1 };

    pub fn vector(n: usize) -> Self {
        Shape { rows: n, cols: 1 }
    }

    pub fn matrix(rows: usize, cols: usize) -> Self {
        Shape { rows, cols }
    }

    pub fn len(&self) -> usize {
        self.rows * self.cols
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn is_vector(&self) -> bool {
        self.cols == 1
    }
}

/// Handle to a value recorded on a [`Tape`].
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Var(usize);

impl Var {
    pub fn id(self) -> usize {
        self.0
    }
}

#[derive(Debug, Clone)]
enum Storage {
    Owned(Vec<Real>),
    Shared(Arc<[Real]>),
}

impl Storage {
    fn as_slice(&self) -> &[Real] {
        match self {
            Storage::Owned(v) => v,
            Storage::Shared(v) => v,
        }
    }
}

#[derive(Debug, Clone)]
enum Op {
    Leaf,
    MatVec(Var, Var),
    Add(Var, Var),
    Sub(Var, Var),
    Scale(Var, Real),
    Concat(Vec<Var>),
    Dot(Var, Var),
    Mean(Vec<Var>),
    Sum(Vec<Var>),
    Tanh(Var),
    Sigmoid(Var),
    Relu(Var),
    BceWithLogits(Var, Real),
}

#[derive(Debug, Clone)]
struct Node {
    data: Storage,
    shape: Shape,
    op: Op,
    requires_grad: bool,
}

#[derive(Debug, Clone, Default)]
pub struct Tape {
    nodes: Vec<Node>,
}

fn sigmoid(x: Real) -> Real {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// `log(1 + e^x)` without overflow.
fn softplus(x: Real) -> Real {
    x.max(0.0) + (-x.abs()).exp().ln_1p()
}

impl Tape {
    pub fn new() -> Self {
        Tape::default()
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    fn push(&mut self, data: Storage, shape: Shape, op: Op, requires_grad: bool) -> Var {
        self.nodes.push(Node { data, shape, op, requires_grad });
        Var(self.nodes.len() - 1)
    }

    fn node(&self, v: Var) -> &Node {
        &self.nodes[v.0]
    }

    pub fn value(&self, v: Var) -> &[Real] {
        self.node(v).data.as_slice()
    }

    pub fn scalar(&self, v: Var) -> Real {
        self.value(v)[0]
    }

    pub fn shape(&self, v: Var) -> Shape {
        self.node(v).shape
    }

    pub fn requires_grad(&self, v: Var) -> bool {
        self.node(v).requires_grad
    }

    pub fn leaf(&mut self, data: Vec<Real>, shape: Shape, requires_grad: bool) -> Result<Var, TensorError> {
        if data.len() != shape.len() {
            return Err(TensorError::BadLength { len: data.len(), shape });
        }
        Ok(self.push(Storage::Owned(data), shape, Op::Leaf, requires_grad))
    }

    /// Leaf that borrows a shared buffer.
    pub fn leaf_shared(
        &mut self,
        data: Arc<[Real]>,
        shape: Shape,
        requires_grad: bool,
    ) -> Result<Var, TensorError> {
        if data.len() != shape.len() {
            return Err(TensorError::BadLength { len: data.len(), shape });
        }
        Ok(self.push(Storage::Shared(data), shape, Op::Leaf, requires_grad))
    }

    pub fn vector(&mut self, data: Vec<Real>, requires_grad: bool) -> Var {
        let shape = Shape::vector(data.len());
        self.push(Storage::Owned(data), shape, Op::Leaf, requires_grad)
    }

    pub fn zeros(&mut self, n: usize) -> Var {
        self.vector(vec![0.0; n], false)
    }

    fn grad_of(&self, inputs: &[Var]) -> bool {
        inputs.iter().any(|&v| self.node(v).requires_grad)
    }

    fn unary(&mut self, x: Var, op: Op, f: impl Fn(Real) -> Real) -> Var {
        let data: Vec<Real> = self.value(x).iter().map(|&a| f(a)).collect();
        let shape = self.shape(x);
        let rg = self.grad_of(&[x]);
        self.push(Storage::Owned(data), shape, op, rg)
    }

    /// `m · x` for an `r x c` matrix and length-`c` vector.
    pub fn matvec(&mut self, m: Var, x: Var) -> Result<Var, TensorError> {
        let (ms, xs) = (self.shape(m), self.shape(x));
        if !xs.is_vector() || ms.cols != xs.rows {
            return Err(TensorError::ShapeMismatch { op: "matvec", left: ms, right: xs });
        }
        let (mv, xv) = (self.value(m), self.value(x));
        let out: Vec<Real> = mv
            .chunks_exact(ms.cols)
            .map(|row| row.iter().zip(xv).map(|(a, b)| a * b).sum())
            .collect();
        let rg = self.grad_of(&[m, x]);
        Ok(self.push(Storage::Owned(out), Shape::vector(ms.rows), Op::MatVec(m, x), rg))
    }

    fn same_shape(&self, op: &'static str, a: Var, b: Var) -> Result<Shape, TensorError> {
        let (sa, sb) = (self.shape(a), self.shape(b));
        if sa != sb {
            return Err(TensorError::ShapeMismatch { op, left: sa, right: sb });
        }
        Ok(sa)
    }

    pub fn add(&mut self, a: Var, b: Var) -> Result<Var, TensorError> {
        let shape = self.same_shape("add", a, b)?;
        let out = self.value(a).iter().zip(self.value(b)).map(|(x, y)| x + y).collect();
        let rg = self.grad_of(&[a, b]);
        Ok(self.push(Storage::Owned(out), shape, Op::Add(a, b), rg))
    }

    pub fn sub(&mut self, a: Var, b: Var) -> Result<Var, TensorError> {
        let shape = self.same_shape("sub", a, b)?;
        let out = self.value(a).iter().zip(self.value(b)).map(|(x, y)| x - y).collect();
        let rg = self.grad_of(&[a, b]);
        Ok(self.push(Storage::Owned(out), shape, Op::Sub(a, b), rg))
    }

    pub fn scale(&mut self, a: Var, c: Real) -> Var {
        self.unary(a, Op::Scale(a, c), |x| c * x)
    }

    pub fn concat(&mut self, parts: &[Var]) -> Result<Var, TensorError> {
        let mut out = Vec::new();
        for &p in parts {
            let s = self.shape(p);
            if !s.is_vector() {
                return Err(TensorError::ShapeMismatch { op: "concat", left: s, right: Shape::vector(s.len()) });
            }
            out.extend_from_slice(self.value(p));
        }
        let n = out.len();
        let rg = self.grad_of(parts);
        Ok(self.push(Storage::Owned(out), Shape::vector(n), Op::Concat(parts.to_vec()), rg))
    }

    pub fn dot(&mut self, a: Var, b: Var) -> Result<Var, TensorError> {
        self.same_shape("dot", a, b)?;
        let s: Real = self.value(a).iter().zip(self.value(b)).map(|(x, y)| x * y).sum();
        let rg = self.grad_of(&[a, b]);
        Ok(self.push(Storage::Owned(vec![s]), Shape::SCALAR, Op::Dot(a, b), rg))
    }

    pub fn mean_vectors(&mut self, xs: &[Var]) -> Result<Var, TensorError> {
        let (&first, rest) = xs.split_first().ok_or(TensorError::EmptyMean)?;
        let shape = self.shape(first);
        let mut acc = self.value(first).to_vec();
        for &x in rest {
            self.same_shape("mean_vectors", first, x)?;
            for (a, b) in acc.iter_mut().zip(self.value(x)) {
                *a += b;
            }
        }
        let inv = 1.0 / xs.len() as Real;
        acc.iter_mut().for_each(|a| *a *= inv);
        let rg = self.grad_of(xs);
        Ok(self.push(Storage::Owned(acc), shape, Op::Mean(xs.to_vec()), rg))
    }

    /// Elementwise sum of same-shaped values.
    pub fn sum(&mut self, xs: &[Var]) -> Result<Var, TensorError> {
        let (&first, rest) = xs.split_first().ok_or(TensorError::EmptyMean)?;
        let shape = self.shape(first);
        let mut acc = self.value(first).to_vec();
        for &x in rest {
            self.same_shape("sum", first, x)?;
            for (a, b) in acc.iter_mut().zip(self.value(x)) {
                *a += b;
            }
        }
        let rg = self.grad_of(xs);
        Ok(self.push(Storage::Owned(acc), shape, Op::Sum(xs.to_vec()), rg))
    }

    pub fn tanh(&mut self, x: Var) -> Var {
        self.unary(x, Op::Tanh(x), Real::tanh)
    }

    pub fn sigmoid(&mut self, x: Var) -> Var {
        self.unary(x, Op::Sigmoid(x), sigmoid)
    }

    pub fn relu(&mut self, x: Var) -> Var {
        self.unary(x, Op::Relu(x), |a| a.max(0.0))
    }

    /// Binary cross-entropy on a logit, `softplus(x) - y·x`.
    pub fn bce_with_logits(&mut self, logit: Var, label: Real) -> Result<Var, TensorError> {
        let s = self.shape(logit);
        if s != Shape::SCALAR {
            return Err(TensorError::NotScalar(s));
        }
        let x = self.scalar(logit);
        if !x.is_finite() {
            return Err(TensorError::NonFinite("bce_with_logits"));
        }
        let loss = softplus(x) - label * x;
        let rg = self.grad_of(&[logit]);
        Ok(self.push(Storage::Owned(vec![loss]), Shape::SCALAR, Op::BceWithLogits(logit, label), rg))
    }

    /// Gradients of a scalar root with respect to every value that requires
    /// grad.
    pub fn backward(&self, root: Var) -> Result<Gradients, TensorError> {
        let s = self.shape(root);
        if s != Shape::SCALAR {
            return Err(TensorError::NotScalar(s));
        }
        self.backward_from(&[(root, vec![1.0])])
    }

    /// Reverse sweep from several seeded outputs. Seeds on the same var add.
    pub fn backward_from(&self, seeds: &[(Var, Vec<Real>)]) -> Result<Gradients, TensorError> {
        let mut grads: Vec<Option<Vec<Real>>> = vec![None; self.nodes.len()];
        let mut start = 0;
        for (v, g) in seeds {
            let shape = self.shape(*v);
            if g.len() != shape.len() {
                return Err(TensorError::BadLength { len: g.len(), shape });
            }
            accumulate(&mut grads[v.0], g);
            start = start.max(v.0 + 1);
        }

        for id in (0..start).rev() {
            let node = &self.nodes[id];
            if !node.requires_grad {
                continue;
            }
            let Some(g) = grads[id].take() else {
                continue;
            };
            self.propagate(id, &g, &mut grads);
            grads[id] = Some(g);
        }
        Ok(Gradients { grads })
    }

    fn wants(&self, v: Var) -> bool {
        self.nodes[v.0].requires_grad
    }

    fn propagate(&self, id: usize, g: &[Real], grads: &mut [Option<Vec<Real>>]) {
        let node = &self.nodes[id];
        let out = node.data.as_slice();
        match &node.op {
            Op::Leaf => {}
            Op::MatVec(m, x) => {
                let ms = self.shape(*m);
                let (mv, xv) = (self.value(*m), self.value(*x));
                if self.wants(*m) {
                    let mut gm = vec![0.0; ms.len()];
                    for (i, row) in gm.chunks_exact_mut(ms.cols).enumerate() {
                        let gi = g[i];
                        for (r, &xj) in row.iter_mut().zip(xv) {
                            *r = gi * xj;
                        }
                    }
                    accumulate_owned(&mut grads[m.0], gm);
                }
                if self.wants(*x) {
                    let mut gx = vec![0.0; ms.cols];
                    for (row, &gi) in mv.chunks_exact(ms.cols).zip(g) {
                        for (acc, &mij) in gx.iter_mut().zip(row) {
                            *acc += mij * gi;
                        }
                    }
                    accumulate_owned(&mut grads[x.0], gx);
                }
            }
            Op::Add(a, b) => {
                if self.wants(*a) {
                    accumulate(&mut grads[a.0], g);
                }
                if self.wants(*b) {
                    accumulate(&mut grads[b.0], g);
                }
            }
            Op::Sub(a, b) => {
                if self.wants(*a) {
                    accumulate(&mut grads[a.0], g);
                }
                if self.wants(*b) {
                    accumulate_owned(&mut grads[b.0], g.iter().map(|x| -x).collect());
                }
            }
            Op::Scale(a, c) => {
                if self.wants(*a) {
                    accumulate_owned(&mut grads[a.0], g.iter().map(|x| c * x).collect());
                }
            }
            Op::Concat(parts) => {
                let mut offset = 0;
                for p in parts {
                    let n = self.shape(*p).len();
                    if self.wants(*p) {
                        accumulate(&mut grads[p.0], &g[offset..offset + n]);
                    }
                    offset += n;
                }
            }
            Op::Dot(a, b) => {
                let g0 = g[0];
                if self.wants(*a) {
                    accumulate_owned(&mut grads[a.0], self.value(*b).iter().map(|x| g0 * x).collect());
                }
                if self.wants(*b) {
                    accumulate_owned(&mut grads[b.0], self.value(*a).iter().map(|x| g0 * x).collect());
                }
            }
            Op::Mean(xs) => {
                let inv = 1.0 / xs.len() as Real;
                let scaled: Vec<Real> = g.iter().map(|x| x * inv).collect();
                for x in xs {
                    if self.wants(*x) {
                        accumulate(&mut grads[x.0], &scaled);
                    }
                }
            }
            Op::Sum(xs) => {
                for x in xs {
                    if self.wants(*x) {
                        accumulate(&mut grads[x.0], g);
                    }
                }
            }
            Op::Tanh(x) => {
                if self.wants(*x) {
                    let d = g.iter().zip(out).map(|(gi, y)| gi * (1.0 - y * y)).collect();
                    accumulate_owned(&mut grads[x.0], d);
                }
            }
            Op::Sigmoid(x) => {
                if self.wants(*x) {
                    let d = g.iter().zip(out).map(|(gi, y)| gi * y * (1.0 - y)).collect();
                    accumulate_owned(&mut grads[x.0], d);
                }
            }
            Op::Relu(x) => {
                if self.wants(*x) {
                    let d = g
                        .iter()
                        .zip(self.value(*x))
                        .map(|(gi, a)| if *a > 0.0 { *gi } else { 0.0 })
                        .collect();
                    accumulate_owned(&mut grads[x.0], d);
                }
            }
            Op::BceWithLogits(x, label) => {
                if self.wants(*x) {
                    let p = sigmoid(self.scalar(*x));
                    accumulate_owned(&mut grads[x.0], vec![g[0] * (p - label)]);
                }
            }
        }
    }
}

fn accumulate(slot: &mut Option<Vec<Real>>, g: &[Real]) {
    match slot {
        Some(acc) => acc.iter_mut().zip(g).for_each(|(a, b)| *a += b),
        None => *slot = Some(g.to_vec()),
    }
}

fn accumulate_owned(slot: &mut Option<Vec<Real>>, g: Vec<Real>) {
    match slot {
        Some(acc) => acc.iter_mut().zip(&g).for_each(|(a, b)| *a += b),
        None => *slot = Some(g),
    }
}

/// Result of a backward sweep.
#[derive(Debug, Clone)]
pub struct Gradients {
    grads: Vec<Option<Vec<Real>>>,
}

impl Gradients {
    pub fn get(&self, v: Var) -> Option<&[Real]> {
        self.grads.get(v.0).and_then(|g| g.as_deref())
    }

    pub fn take(&mut self, v: Var) -> Option<Vec<Real>> {
        self.grads.get_mut(v.0).and_then(Option::take)
    }
}
