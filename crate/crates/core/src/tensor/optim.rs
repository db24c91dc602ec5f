use std::sync::Arc;

use serde::{Deserialize, Serialize};

use super::{Shape, TensorError};
use crate::Real;

/// A named trainable matrix. Data sits behind an `Arc` so tapes can borrow
/// it without copying while a step is in flight.
#[derive(Clone, Debug, PartialEq)]
pub struct ParamTensor {
    pub name: String,
    pub rows: usize,
    pub cols: usize,
    pub data: Arc<[Real]>,
}

impl ParamTensor {
    pub fn new(name: impl Into<String>, rows: usize, cols: usize, data: Vec<Real>) -> Result<Self, TensorError> {
        if data.len() != rows * cols {
            return Err(TensorError::BadLength { len: data.len(), shape: Shape::matrix(rows, cols) });
        }
        Ok(ParamTensor { name: name.into(), rows, cols, data: data.into() })
    }

    pub fn shape(&self) -> Shape {
        Shape::matrix(self.rows, self.cols)
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }
}

/// Ordered collection of parameters; gradients are aligned by index.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct ParamSet {
    params: Vec<ParamTensor>,
}

impl ParamSet {
    pub fn new() -> Self {
        ParamSet::default()
    }

    /// Adds a tensor and returns its index.
    pub fn push(&mut self, p: ParamTensor) -> usize {
        self.params.push(p);
        self.params.len() - 1
    }

    pub fn len(&self) -> usize {
        self.params.len()
    }

    pub fn is_empty(&self) -> bool {
        self.params.is_empty()
    }

    pub fn get(&self, i: usize) -> &ParamTensor {
        &self.params[i]
    }

    pub fn iter(&self) -> impl Iterator<Item = &ParamTensor> {
        self.params.iter()
    }

    pub fn index_of(&self, name: &str) -> Result<usize, TensorError> {
        self.params
            .iter()
            .position(|p| p.name == name)
            .ok_or_else(|| TensorError::UnknownParam(name.to_string()))
    }

    pub fn by_name(&self, name: &str) -> Result<&ParamTensor, TensorError> {
        Ok(&self.params[self.index_of(name)?])
    }

    /// Replaces the values of parameter `i`; shape must match.
    pub fn set_data(&mut self, i: usize, data: Vec<Real>) -> Result<(), TensorError> {
        let p = &mut self.params[i];
        if data.len() != p.len() {
            return Err(TensorError::BadLength { len: data.len(), shape: p.shape() });
        }
        p.data = data.into();
        Ok(())
    }

    pub fn zero_grads(&self) -> ParamGrads {
        ParamGrads { grads: self.params.iter().map(|p| vec![0.0; p.len()]).collect() }
    }

    pub fn total_len(&self) -> usize {
        self.params.iter().map(ParamTensor::len).sum()
    }
}

/// Gradient buffers aligned with a [`ParamSet`].
#[derive(Clone, Debug, PartialEq)]
pub struct ParamGrads {
    pub grads: Vec<Vec<Real>>,
}

impl ParamGrads {
    pub fn add_to(&mut self, i: usize, g: &[Real]) {
        self.grads[i].iter_mut().zip(g).for_each(|(a, b)| *a += b);
    }

    pub fn merge(&mut self, other: &ParamGrads) {
        for (a, b) in self.grads.iter_mut().zip(&other.grads) {
            a.iter_mut().zip(b).for_each(|(x, y)| *x += y);
        }
    }

    pub fn zero(&mut self) {
        self.grads.iter_mut().for_each(|g| g.fill(0.0));
    }

    pub fn scale(&mut self, c: Real) {
        self.grads.iter_mut().flatten().for_each(|g| *g *= c);
    }

    pub fn l2_norm(&self) -> Real {
        self.grads.iter().flatten().map(|g| g * g).sum::<Real>().sqrt()
    }

    pub fn is_finite(&self) -> bool {
        self.grads.iter().flatten().all(|g| g.is_finite())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum OptimizerKind {
    Sgd { lr: Real },
    Adam { lr: Real, beta1: Real, beta2: Real, eps: Real },
}

impl OptimizerKind {
    pub fn adam(lr: Real) -> Self {
        OptimizerKind::Adam { lr, beta1: 0.9, beta2: 0.999, eps: 1e-8 }
    }

    pub fn lr(&self) -> Real {
        match *self {
            OptimizerKind::Sgd { lr } | OptimizerKind::Adam { lr, .. } => lr,
        }
    }
}

/// Per-parameter optimizer moments.
#[derive(Clone, Debug)]
pub struct OptimizerState {
    pub kind: OptimizerKind,
    step: u64,
    m: Vec<Vec<Real>>,
    v: Vec<Vec<Real>>,
}

impl OptimizerState {
    pub fn new(kind: OptimizerKind, params: &ParamSet) -> Self {
        let zeros = || params.iter().map(|p| vec![0.0; p.len()]).collect();
        OptimizerState { kind, step: 0, m: zeros(), v: zeros() }
    }

    pub fn steps(&self) -> u64 {
        self.step
    }
}

/// Applies one update and zeroes `grads`.
pub fn optimizer_step(
    params: &mut ParamSet,
    grads: &mut ParamGrads,
    state: &mut OptimizerState,
) -> Result<(), TensorError> {
    let lr = state.kind.lr();
    if !(lr > 0.0 && lr.is_finite()) {
        return Err(TensorError::BadLearningRate(lr));
    }
    if !grads.is_finite() {
        return Err(TensorError::NonFinite("gradients"));
    }
    state.step += 1;
    let t = state.step as i32;
    for (i, g) in grads.grads.iter().enumerate() {
        let mut data = params.get(i).data.to_vec();
        match state.kind {
            OptimizerKind::Sgd { lr } => {
                data.iter_mut().zip(g).for_each(|(w, gi)| *w -= lr * gi);
            }
            OptimizerKind::Adam { lr, beta1, beta2, eps } => {
                let (m, v) = (&mut state.m[i], &mut state.v[i]);
                let c1 = 1.0 - beta1.powi(t);
                let c2 = 1.0 - beta2.powi(t);
                for j in 0..data.len() {
                    m[j] = beta1 * m[j] + (1.0 - beta1) * g[j];
                    v[j] = beta2 * v[j] + (1.0 - beta2) * g[j] * g[j];
                    let mh = m[j] / c1;
                    let vh = v[j] / c2;
                    data[j] -= lr * mh / (vh.sqrt() + eps);
                }
            }
        }
        params.set_data(i, data)?;
    }
    grads.zero();
    Ok(())
}
