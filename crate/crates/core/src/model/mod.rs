//! The per-event model interface and two reference models.
//!
//! A model is expressed through four functions (graph update, neighbour
//! aggregation, embedding update, propagation to neighbours) plus a link
//! predictor. [`process_event`] strings them together for one event, reading
//! and writing embeddings through an [`EventCtx`] that records a local
//! autodiff tape.

mod ctx;
mod io;
mod reference;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::graph::{Direction, DynGraph, EventSubgraph, GraphError};
use crate::stream::{Event, EventKind};
use crate::tensor::{ParamSet, Var};
use crate::{NodeId, Real, Seq};

pub use ctx::{EmbAccess, EventCtx, VersionPins};
pub use io::{apply_params, load_params, save_params, ParamFileHeader, TensorEntry};
pub use reference::{DiffusionLite, DyRepLite};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ModelError {
    #[error("node {node} is not an endpoint of event {seq}")]
    NotEventNode { node: NodeId, seq: Seq },
    #[error("negative time delta {0}")]
    NegativeDelta(Real),
    #[error("prop_update called on a radius-0 model")]
    NoPropagation,
    #[error("event {seq} reads node {node} outside its captured subgraph")]
    ReadOutsideSubgraph { seq: Seq, node: NodeId },
    #[error("event {seq} produced version {got} of node {node}, expected {expected}")]
    VersionConflict { seq: Seq, node: NodeId, expected: u32, got: u32 },
    #[error("decay rate must be finite and non-negative, got {0}")]
    BadDecay(Real),
    #[error("unknown model {0:?} (expected dyrep-lite or diffusion-lite)")]
    UnknownModel(String),
    #[error("bad parameter file: {0}")]
    BadParams(String),
}

/// Selects one of the reference models.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ModelKind {
    DyrepLite,
    DiffusionLite,
}

impl ModelKind {
    pub fn as_str(self) -> &'static str {
        match self {
            ModelKind::DyrepLite => "dyrep-lite",
            ModelKind::DiffusionLite => "diffusion-lite",
        }
    }
}

impl std::str::FromStr for ModelKind {
    type Err = ModelError;

    fn from_str(s: &str) -> Result<Self, ModelError> {
        match s {
            "dyrep-lite" | "dyrep" => Ok(ModelKind::DyrepLite),
            "diffusion-lite" | "diffusion" | "dgnn" => Ok(ModelKind::DiffusionLite),
            _ => Err(ModelError::UnknownModel(s.to_string())),
        }
    }
}

impl std::fmt::Display for ModelKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Construction options shared by the reference models.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ModelConfig {
    pub kind: ModelKind,
    pub dim: usize,
    /// Which neighbours feed the aggregation.
    pub aggregate_both: bool,
    /// Decay rate of propagated updates (diffusion model only).
    pub decay: Real,
    /// All parameters start at zero instead of random values.
    pub zero_init: bool,
    pub seed: u64,
}

impl Default for ModelConfig {
    fn default() -> Self {
        ModelConfig {
            kind: ModelKind::DyrepLite,
            dim: 64,
            aggregate_both: false,
            decay: 0.1,
            zero_init: false,
            seed: 0,
        }
    }
}

impl ModelConfig {
    pub fn aggregation(&self) -> Direction {
        if self.aggregate_both {
            Direction::Both
        } else {
            Direction::In
        }
    }
}

pub fn build_model(cfg: &ModelConfig) -> Result<Box<dyn DynModel>, ModelError> {
    Ok(match cfg.kind {
        ModelKind::DyrepLite => Box::new(DyRepLite::new(cfg)),
        ModelKind::DiffusionLite => Box::new(DiffusionLite::new(cfg)?),
    })
}

/// The four-function event model plus link prediction.
pub trait DynModel: Send + Sync {
    fn kind(&self) -> ModelKind;

    fn dim(&self) -> usize;

    /// 0 when events only write their endpoints, 1 when they also write the
    /// endpoints' neighbours.
    fn update_radius(&self) -> usize;

    fn params(&self) -> &ParamSet;

    fn params_mut(&mut self) -> &mut ParamSet;

    /// Decay rate for radius-1 models.
    fn decay(&self) -> Option<Real> {
        None
    }

    fn update_graph(&self, g: &mut DynGraph, e: &Event) -> Result<(), GraphError> {
        g.apply_structural(e)
    }

    /// `h_n`: transformed mean of `n`'s neighbour embeddings, or zero.
    fn aggregate(&self, cx: &mut EventCtx<'_>, n: NodeId) -> crate::Result<Var>;

    /// New embedding of event node `n` from its old value, its peer's
    /// aggregate and the elapsed time.
    fn update_emb(
        &self,
        cx: &mut EventCtx<'_>,
        n: NodeId,
        h_self: Var,
        h_peer: Var,
        dt: Real,
    ) -> crate::Result<Var>;

    /// The increment event node `n` pushes onto each neighbour.
    fn prop_update(&self, cx: &mut EventCtx<'_>, n: NodeId, z_old: Var, z_new: Var) -> crate::Result<Var>;

    /// Link score (logit) of a node pair.
    fn predict(&self, cx: &mut EventCtx<'_>, z_u: Var, z_v: Var) -> crate::Result<Var>;

    /// `U_e`: the nodes an event writes, ascending.
    fn update_set(&self, sub: &EventSubgraph) -> Vec<NodeId> {
        crate::deps::update_set_for(sub, self.update_radius())
    }
}

/// What one event produced.
#[derive(Clone, Debug)]
pub struct EventOutcome {
    /// Logit of the positive pair, when the event is a prediction target.
    pub positive: Option<Var>,
    /// New embedding of `u` (and of `v`; equal to `z_u` on single-node
    /// events).
    pub z_u: Var,
    pub z_v: Var,
    /// Nodes written, ascending.
    pub touched: Vec<NodeId>,
}

/// Whether an event contributes a positive link-prediction sample.
pub fn is_prediction_target(e: &Event) -> bool {
    !e.is_single_node() && e.kind != EventKind::DeleteEdge
}

/// Runs the model on one captured event: aggregate both endpoints, update
/// both from pre-event values, propagate (radius 1), then write and score.
pub fn process_event(model: &dyn DynModel, cx: &mut EventCtx<'_>) -> crate::Result<EventOutcome> {
    let e = cx.sub.event.clone();
    let single = e.is_single_node();

    let zu_old = cx.emb(e.u)?;
    let zv_old = if single { zu_old } else { cx.emb(e.v)? };
    let h_u = model.aggregate(cx, e.u)?;
    let h_v = if single { h_u } else { model.aggregate(cx, e.v)? };

    let zu_new = model.update_emb(cx, e.u, h_u, h_v, cx.sub.delta_u)?;
    let zv_new = if single { zu_new } else { model.update_emb(cx, e.v, h_v, h_u, cx.sub.delta_v)? };

    let mut writes: Vec<(NodeId, Var)> = vec![(e.u, zu_new)];
    if !single {
        writes.push((e.v, zv_new));
    }

    if model.update_radius() > 0 {
        let mut targets: Vec<NodeId> = Vec::new();
        for n in e.endpoints() {
            targets.extend(cx.sub.neighbors(n));
        }
        targets.sort_unstable();
        targets.dedup();
        targets.retain(|&w| w != e.u && w != e.v);
        if !targets.is_empty() {
            let p_u = model.prop_update(cx, e.u, zu_old, zu_new)?;
            let p_v = if single { None } else { Some(model.prop_update(cx, e.v, zv_old, zv_new)?) };
            for w in targets {
                let z_w = cx.emb(w)?;
                let mut z = cx.tape.add(z_w, p_u)?;
                if let Some(p_v) = p_v {
                    z = cx.tape.add(z, p_v)?;
                }
                writes.push((w, z));
            }
        }
    }

    let mut touched = Vec::with_capacity(writes.len());
    for (n, z) in writes {
        cx.write(n, z)?;
        touched.push(n);
    }
    touched.sort_unstable();

    let positive = if is_prediction_target(&e) { Some(model.predict(cx, zu_new, zv_new)?) } else { None };
    Ok(EventOutcome { positive, z_u: zu_new, z_v: zv_new, touched })
}
