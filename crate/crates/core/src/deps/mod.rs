//! Event dependency analysis and dependency-respecting execution.
//!
//! Event `e_j` depends on an earlier event `e_i` when `e_j`'s read set (its
//! k-hop affected node set `V_j`) meets `e_i`'s write set `U_i`. The relation
//! is kept as a DAG whose edges point from later to earlier events; a
//! virtual root `S` precedes every event. Independent events can then run
//! concurrently under [`run_schedule`].

mod closure;
mod schedule;

use std::collections::HashMap;
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::graph::{sorted_intersects, DynGraph, EventSubgraph};
use crate::model::VersionPins;
use crate::stream::Event;
use crate::{NodeId, Seq};

pub use closure::{naive_closure, BitMatrix};
pub use schedule::{run_schedule, run_schedule_reverse, ScheduleTrace};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum DepError {
    #[error("dependency test needs a later event first: {later} is not after {earlier}")]
    SeqOrder { later: Seq, earlier: Seq },
    #[error("worker count must be at least 1")]
    ZeroWorkers,
    #[error("update radius {radius} exceeds hop count {k}: writes would fall outside the read set")]
    RadiusExceedsHops { radius: usize, k: usize },
    #[error("executor panicked on event {seq}: {message}")]
    ExecutorPanic { seq: Seq, message: String },
    #[error("scheduler stalled with {done} of {total} events done")]
    Stalled { done: usize, total: usize },
}

/// Which conflicts create an edge.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DepMode {
    /// Later read set meets earlier write set.
    #[default]
    Paper,
    /// Also later write set meets earlier read set.
    Symmetric,
}

/// How direct dependencies are searched.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DepSearch {
    /// Test every earlier event of the window.
    #[default]
    Scan,
    /// Per-node last-writer / readers-since index. Drops edges implied by
    /// transitivity, keeps the same closure.
    Indexed,
}

/// `U_e`: the nodes an event writes.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct UpdateSet {
    pub seq: Seq,
    pub nodes: Vec<NodeId>,
}

/// The read and write sets of one event, both ascending.
#[derive(Clone, Copy, Debug)]
pub struct AccessSets<'a> {
    pub seq: Seq,
    pub affected: &'a [NodeId],
    pub update: &'a [NodeId],
}

/// Whether `later` must wait for `earlier`.
pub fn depends_on(later: AccessSets<'_>, earlier: AccessSets<'_>, mode: DepMode) -> Result<bool, DepError> {
    if later.seq <= earlier.seq {
        return Err(DepError::SeqOrder { later: later.seq, earlier: earlier.seq });
    }
    Ok(conflict(later, earlier, mode))
}

fn conflict(later: AccessSets<'_>, earlier: AccessSets<'_>, mode: DepMode) -> bool {
    sorted_intersects(later.affected, earlier.update)
        || (mode == DepMode::Symmetric && sorted_intersects(later.update, earlier.affected))
}

/// `U_e` for a model of the given radius: the endpoints, plus their
/// captured neighbours when the radius is 1.
pub fn update_set_for(sub: &EventSubgraph, radius: usize) -> Vec<NodeId> {
    let e = &sub.event;
    let mut out = e.endpoints();
    if radius > 0 {
        for n in e.endpoints() {
            out.extend(sub.neighbors(n));
        }
    }
    out.sort_unstable();
    out.dedup();
    out
}

/// Dependency DAG over one window. Events are addressed by their index in
/// the window; `seqs` maps back to stream positions.
#[derive(Clone, Debug, PartialEq)]
pub struct DepGraph {
    pub mode: DepMode,
    seqs: Vec<Seq>,
    affected: Vec<Vec<NodeId>>,
    updates: Vec<Vec<NodeId>>,
    deps: Vec<Vec<usize>>,
    dependents: Vec<Vec<usize>>,
}

impl DepGraph {
    /// Builds the DAG from per-event access sets (already in seq order).
    pub fn from_sets(
        seqs: Vec<Seq>,
        affected: Vec<Vec<NodeId>>,
        updates: Vec<Vec<NodeId>>,
        mode: DepMode,
        search: DepSearch,
    ) -> Self {
        assert_eq!(seqs.len(), affected.len());
        assert_eq!(seqs.len(), updates.len());
        let deps = match search {
            DepSearch::Scan => scan_deps(&seqs, &affected, &updates, mode),
            DepSearch::Indexed => indexed_deps(&affected, &updates, mode),
        };
        let mut dependents = vec![Vec::new(); seqs.len()];
        for (i, ds) in deps.iter().enumerate() {
            for &j in ds {
                dependents[j].push(i);
            }
        }
        DepGraph { mode, seqs, affected, updates, deps, dependents }
    }

    pub fn len(&self) -> usize {
        self.seqs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.seqs.is_empty()
    }

    pub fn seq(&self, i: usize) -> Seq {
        self.seqs[i]
    }

    pub fn seqs(&self) -> &[Seq] {
        &self.seqs
    }

    /// Direct dependencies of event `i` (earlier indices, descending).
    pub fn deps(&self, i: usize) -> &[usize] {
        &self.deps[i]
    }

    /// Events that directly depend on `i` (ascending).
    pub fn dependents(&self, i: usize) -> &[usize] {
        &self.dependents[i]
    }

    pub fn affected(&self, i: usize) -> &[NodeId] {
        &self.affected[i]
    }

    pub fn update_set(&self, i: usize) -> UpdateSet {
        UpdateSet { seq: self.seqs[i], nodes: self.updates[i].clone() }
    }

    pub fn updates(&self, i: usize) -> &[NodeId] {
        &self.updates[i]
    }

    pub fn access(&self, i: usize) -> AccessSets<'_> {
        AccessSets { seq: self.seqs[i], affected: &self.affected[i], update: &self.updates[i] }
    }

    pub fn num_edges(&self) -> usize {
        self.deps.iter().map(Vec::len).sum()
    }

    /// Weakly connected components of the dependency edges, each ascending,
    /// ordered by first member.
    pub fn chains(&self) -> Vec<Vec<usize>> {
        let n = self.len();
        let mut parent: Vec<usize> = (0..n).collect();
        fn find(p: &mut [usize], mut x: usize) -> usize {
            while p[x] != x {
                p[x] = p[p[x]];
                x = p[x];
            }
            x
        }
        for (i, ds) in self.deps.iter().enumerate() {
            for &j in ds {
                let (a, b) = (find(&mut parent, i), find(&mut parent, j));
                if a != b {
                    parent[a.max(b)] = a.min(b);
                }
            }
        }
        let mut groups: HashMap<usize, Vec<usize>> = HashMap::new();
        for i in 0..n {
            let r = find(&mut parent, i);
            groups.entry(r).or_default().push(i);
        }
        let mut out: Vec<Vec<usize>> = groups.into_values().collect();
        out.sort_unstable_by_key(|c| c[0]);
        out
    }

    /// Longest dependency path, counted in events.
    pub fn critical_path(&self) -> usize {
        let mut depth = vec![0usize; self.len()];
        for i in 0..self.len() {
            depth[i] = 1 + self.deps[i].iter().map(|&j| depth[j]).max().unwrap_or(0);
        }
        depth.into_iter().max().unwrap_or(0)
    }

    /// Events per critical-path step; 1 for an empty window.
    pub fn parallelism(&self) -> f64 {
        let cp = self.critical_path();
        if cp == 0 {
            1.0
        } else {
            self.len() as f64 / cp as f64
        }
    }

    /// Transitive closure: row `i` holds every event `i` depends on.
    pub fn closure(&self) -> BitMatrix {
        let mut m = BitMatrix::new(self.len());
        for i in 0..self.len() {
            for &j in &self.deps[i] {
                m.set(i, j);
                m.or_row_into(j, i);
            }
        }
        m
    }

    /// Per event, how many earlier events of the window write each node it
    /// reads or writes.
    pub fn version_pins(&self) -> Vec<VersionPins> {
        let mut writes: HashMap<NodeId, u32> = HashMap::new();
        let mut out = Vec::with_capacity(self.len());
        for i in 0..self.len() {
            let mut pairs: Vec<(NodeId, u32)> = Vec::new();
            for &n in self.affected[i].iter().chain(&self.updates[i]) {
                if let Some(&c) = writes.get(&n) {
                    pairs.push((n, c));
                }
            }
            pairs.sort_unstable();
            pairs.dedup();
            out.push(VersionPins::from_pairs(pairs));
            for &n in &self.updates[i] {
                *writes.entry(n).or_insert(0) += 1;
            }
        }
        out
    }

    /// Graphviz rendering. Edges run from the later event to the one it
    /// depends on; `S` points at events without dependencies. Events are
    /// labelled `e<seq+1>`.
    pub fn to_dot(&self) -> String {
        let mut s = String::from("digraph {\n");
        for i in 0..self.len() {
            if self.deps[i].is_empty() {
                let _ = writeln!(s, "  S -> e{};", self.seqs[i] + 1);
            }
        }
        for i in 0..self.len() {
            let mut ds = self.deps[i].clone();
            ds.sort_unstable();
            for j in ds {
                let _ = writeln!(s, "  e{} -> e{};", self.seqs[i] + 1, self.seqs[j] + 1);
            }
        }
        s.push_str("}\n");
        s
    }
}

fn scan_deps(seqs: &[Seq], affected: &[Vec<NodeId>], updates: &[Vec<NodeId>], mode: DepMode) -> Vec<Vec<usize>> {
    let sets = |i: usize| AccessSets { seq: seqs[i], affected: &affected[i], update: &updates[i] };
    crate::parallel::map_indexed(seqs.len(), |i| {
        (0..i).rev().filter(|&j| conflict(sets(i), sets(j), mode)).collect()
    })
}

fn indexed_deps(affected: &[Vec<NodeId>], updates: &[Vec<NodeId>], mode: DepMode) -> Vec<Vec<usize>> {
    let mut last_writer: HashMap<NodeId, usize> = HashMap::new();
    // Events that read a node since its last write.
    let mut readers: HashMap<NodeId, Vec<usize>> = HashMap::new();
    let mut out = Vec::with_capacity(affected.len());
    for i in 0..affected.len() {
        let mut ds: Vec<usize> = affected[i].iter().filter_map(|n| last_writer.get(n).copied()).collect();
        if mode == DepMode::Symmetric {
            for n in &updates[i] {
                if let Some(rs) = readers.get(n) {
                    ds.extend_from_slice(rs);
                }
                if let Some(&w) = last_writer.get(n) {
                    ds.push(w);
                }
            }
        }
        ds.sort_unstable_by(|a, b| b.cmp(a));
        ds.dedup();
        out.push(ds);
        for &n in &updates[i] {
            last_writer.insert(n, i);
            readers.remove(&n);
        }
        for &n in &affected[i] {
            readers.entry(n).or_default().push(i);
        }
    }
    out
}

/// A window after dependency analysis: the DAG plus one captured subgraph
/// per event.
#[derive(Clone, Debug)]
pub struct AnalyzedWindow {
    pub graph: DepGraph,
    pub snapshots: Vec<EventSubgraph>,
}

/// Options of [`build_dep_graph`].
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct DepConfig {
    pub k: usize,
    pub radius: usize,
    pub mode: DepMode,
    pub search: DepSearch,
}

impl Default for DepConfig {
    fn default() -> Self {
        DepConfig { k: 1, radius: 0, mode: DepMode::Paper, search: DepSearch::Scan }
    }
}

/// Applies each event's structural update (unless an earlier window already
/// did), captures its k-hop subgraph on the current topology, and links it
/// to every earlier event of the window it conflicts with.
pub fn build_dep_graph(events: &[Event], g: &mut DynGraph, cfg: &DepConfig) -> crate::Result<AnalyzedWindow> {
    if cfg.radius > cfg.k {
        return Err(DepError::RadiusExceedsHops { radius: cfg.radius, k: cfg.k }.into());
    }
    let mut snapshots = Vec::with_capacity(events.len());
    let mut affected = Vec::with_capacity(events.len());
    let mut updates = Vec::with_capacity(events.len());
    for e in events {
        g.apply_if_new(e)?;
        let sub = g.get_subgraph(e, cfg.k)?;
        affected.push(sub.affected.clone());
        updates.push(update_set_for(&sub, cfg.radius));
        snapshots.push(sub);
    }
    let seqs = events.iter().map(|e| e.seq).collect();
    let graph = DepGraph::from_sets(seqs, affected, updates, cfg.mode, cfg.search);
    Ok(AnalyzedWindow { graph, snapshots })
}
