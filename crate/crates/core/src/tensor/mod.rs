//! Dense vector/matrix math with a reverse-mode autodiff tape, plus the
//! parameter containers and optimizers the trainer steps.

mod optim;
mod tape;

use thiserror::Error;

pub use optim::{optimizer_step, OptimizerKind, OptimizerState, ParamGrads, ParamSet, ParamTensor};
pub use tape::{Gradients, Shape, Tape, Var};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum TensorError {
    #[error("{op}: shape mismatch {left:?} vs {right:?}")]
    ShapeMismatch { op: &'static str, left: Shape, right: Shape },
    #[error("data length {len} does not match shape {shape:?}")]
    BadLength { len: usize, shape: Shape },
    #[error("mean of an empty vector list")]
    EmptyMean,
    #[error("backward root must be a scalar, got {0:?}")]
    NotScalar(Shape),
    #[error("non-finite value in {0}")]
    NonFinite(&'static str),
    #[error("learning rate must be positive, got {0}")]
    BadLearningRate(f64),
    #[error("parameter {0} not found")]
    UnknownParam(String),
}
