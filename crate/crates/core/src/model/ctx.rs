use std::sync::Arc;

use super::ModelError;
use crate::embed::EmbeddingStore;
use crate::graph::EventSubgraph;
use crate::tensor::{ParamSet, Shape, Tape, Var};
use crate::{NodeId, Real};

/// How many earlier events of the same run write each node before this
/// event does. An event reads node `n` at `base[n] + offset(n)`, which is
/// exactly the value a sequential run would see, no matter how far later
/// writers have progressed.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct VersionPins {
    // Ascending by node; nodes with offset 0 are omitted.
    offsets: Vec<(NodeId, u32)>,
}

impl VersionPins {
    pub fn from_pairs(mut pairs: Vec<(NodeId, u32)>) -> Self {
        pairs.retain(|&(_, o)| o > 0);
        pairs.sort_unstable();
        VersionPins { offsets: pairs }
    }

    pub fn offset(&self, n: NodeId) -> u32 {
        self.offsets
            .binary_search_by_key(&n, |&(m, _)| m)
            .map_or(0, |i| self.offsets[i].1)
    }

    pub fn pairs(&self) -> &[(NodeId, u32)] {
        &self.offsets
    }
}

/// One embedding read or write recorded by an event.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct EmbAccess {
    pub node: NodeId,
    pub version: u32,
    pub var: Var,
}

/// Per-event execution context: the event's snapshot, a private tape, and
/// version-pinned access to the shared embedding store.
pub struct EventCtx<'a> {
    pub tape: Tape,
    pub sub: &'a EventSubgraph,
    store: &'a EmbeddingStore,
    params: &'a ParamSet,
    base: &'a [u32],
    pins: &'a VersionPins,
    track_grads: bool,
    param_vars: Vec<Option<Var>>,
    reads: Vec<EmbAccess>,
    writes: Vec<EmbAccess>,
}

impl<'a> EventCtx<'a> {
    /// `base` holds every node's latest version when the run began.
    pub fn new(
        sub: &'a EventSubgraph,
        store: &'a EmbeddingStore,
        params: &'a ParamSet,
        base: &'a [u32],
        pins: &'a VersionPins,
        track_grads: bool,
    ) -> Self {
        EventCtx {
            tape: Tape::new(),
            sub,
            store,
            params,
            base,
            pins,
            track_grads,
            param_vars: vec![None; params.len()],
            reads: Vec::new(),
            writes: Vec::new(),
        }
    }

    pub fn dim(&self) -> usize {
        self.store.dim()
    }

    pub fn seq(&self) -> usize {
        self.sub.event.seq
    }

    /// Tape leaf for parameter `i`, created once per event.
    pub fn param(&mut self, i: usize) -> Var {
        if let Some(v) = self.param_vars[i] {
            return v;
        }
        let p = self.params.get(i);
        let v = self
            .tape
            .leaf_shared(p.data.clone(), p.shape(), self.track_grads)
            .expect("parameter length matches its shape");
        self.param_vars[i] = Some(v);
        v
    }

    /// Parameters that appear on the tape, as `(index, var)`.
    pub fn param_vars(&self) -> impl Iterator<Item = (usize, Var)> + '_ {
        self.param_vars.iter().enumerate().filter_map(|(i, v)| v.map(|v| (i, v)))
    }

    fn base_version(&self, n: NodeId) -> u32 {
        self.base.get(n as usize).copied().unwrap_or(0)
    }

    fn read_version(&mut self, n: NodeId, version: u32) -> crate::Result<Var> {
        if let Some(r) = self.reads.iter().find(|r| r.node == n && r.version == version) {
            return Ok(r.var);
        }
        let x = self.store.get_version(n, version)?;
        // Values that predate the run are constants for this run.
        let grad = self.track_grads && version > self.base_version(n);
        let var = self.tape.leaf_shared(x, Shape::vector(self.dim()), grad)?;
        self.reads.push(EmbAccess { node: n, version, var });
        Ok(var)
    }

    /// Reads `n` as a sequential run would see it just before this event.
    /// `n` must lie in the event's captured subgraph.
    pub fn emb(&mut self, n: NodeId) -> crate::Result<Var> {
        if !self.sub.contains(n) {
            return Err(ModelError::ReadOutsideSubgraph { seq: self.seq(), node: n }.into());
        }
        let version = self.base_version(n) + self.pins.offset(n);
        self.read_version(n, version)
    }

    /// Reads `n` as it was when the run began (used for negative samples,
    /// which may fall anywhere in the graph).
    pub fn emb_at_base(&mut self, n: NodeId) -> crate::Result<Var> {
        let version = self.base_version(n);
        self.read_version(n, version)
    }

    /// Stores the value of `var` as the next version of `n`.
    pub fn write(&mut self, n: NodeId, var: Var) -> crate::Result<u32> {
        let expected = self.base_version(n) + self.pins.offset(n) + 1;
        let value: Arc<[Real]> = Arc::from(self.tape.value(var));
        let got = self.store.update_emb(n, value)?;
        if got != expected {
            return Err(ModelError::VersionConflict { seq: self.seq(), node: n, expected, got }.into());
        }
        self.writes.push(EmbAccess { node: n, version: got, var });
        Ok(got)
    }

    pub fn reads(&self) -> &[EmbAccess] {
        &self.reads
    }

    pub fn writes(&self) -> &[EmbAccess] {
        &self.writes
    }

    /// Drops the borrows, keeping what backward needs.
    pub fn finish(self) -> (Tape, Vec<EmbAccess>, Vec<EmbAccess>, Vec<(usize, Var)>) {
        let params = self.param_vars().collect();
        (self.tape, self.reads, self.writes, params)
    }
}
