//! Event-stream dynamic GNN training engine.
//!
//! The crate is organised bottom-up:
//!
//! - [`stream`]: events, graph streams, the edge-list file format and a
//!   synthetic locality-stream generator.
//! - [`graph`]: in/out-separated indexed adjacency lists and event subgraph
//!   capture.
//! - [`embed`]: multi-version node embedding storage.
//! - [`tensor`]: a small reverse-mode autodiff tape plus optimizers.
//! - [`model`]: the four-function event model interface and two reference
//!   models.
//! - [`window`]: fixed and adaptive window selection.
//! - [`deps`]: event dependency analysis and the two-queue parallel scheduler.
//! - [`train`]: the training loop, evaluation, metrics and the staged pipeline.

pub mod deps;
pub mod embed;
pub mod error;
pub mod graph;
pub mod model;
pub mod parallel;
pub mod stream;
pub mod tensor;
pub mod train;
pub mod window;

pub use error::{Error, Result};

/// Dense node identifier. Node ids index adjacency and embedding arrays.
pub type NodeId = u32;

/// Position of an event in its stream (0-based).
pub type Seq = usize;

/// Scalar type used for model numerics.
pub type Real = f64;
