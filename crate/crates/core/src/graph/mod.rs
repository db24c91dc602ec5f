//! Dynamic graph topology.
//!
//! Each node keeps its incoming and outgoing edges in two growable arrays,
//! plus a `neighbor -> offset` hash index per direction for O(1) edge lookup.
//! Traversal reads the arrays directly; the indexes are only consulted for
//! point access, upserts and swap-remove deletion.

mod subgraph;

use std::collections::HashMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::stream::{Event, EventKind, GraphStream};
use crate::{NodeId, Seq};

pub use subgraph::{EventSubgraph, NodeSnapshot};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GraphError {
    #[error("unknown node {0}")]
    UnknownNode(NodeId),
    #[error("self-loop on node {0}")]
    SelfLoop(NodeId),
    #[error("edge ({0}, {1}) not found")]
    EdgeNotFound(NodeId, NodeId),
    #[error("event {seq} already applied (watermark {watermark})")]
    StaleEvent { seq: Seq, watermark: Seq },
    #[error("add_node event names {got}, next id is {expected}")]
    InvalidAddNode { expected: NodeId, got: NodeId },
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct AdjEntry {
    pub nbr: NodeId,
    pub weight: f64,
    pub t: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Direction {
    In,
    Out,
    Both,
}

#[derive(Clone, Debug, Default)]
pub struct NodeAdjacency {
    in_edges: Vec<AdjEntry>,
    out_edges: Vec<AdjEntry>,
    in_index: HashMap<NodeId, usize>,
    out_index: HashMap<NodeId, usize>,
    // (seq, t) of every event that touched this node, ascending by seq.
    touches: Vec<(Seq, f64)>,
}

impl NodeAdjacency {
    pub fn in_edges(&self) -> &[AdjEntry] {
        &self.in_edges
    }

    pub fn out_edges(&self) -> &[AdjEntry] {
        &self.out_edges
    }

    fn last_time(&self) -> f64 {
        self.touches.last().map_or(0.0, |&(_, t)| t)
    }

    #[cfg(test)]
    fn index_consistent(&self) -> bool {
        let check = |edges: &[AdjEntry], index: &HashMap<NodeId, usize>| {
            index.len() == edges.len()
                && edges.iter().enumerate().all(|(o, e)| index.get(&e.nbr) == Some(&o))
        };
        check(&self.in_edges, &self.in_index) && check(&self.out_edges, &self.out_index)
    }
}

fn upsert(edges: &mut Vec<AdjEntry>, index: &mut HashMap<NodeId, usize>, entry: AdjEntry) {
    match index.get(&entry.nbr) {
        Some(&o) => edges[o] = entry,
        None => {
            index.insert(entry.nbr, edges.len());
            edges.push(entry);
        }
    }
}

fn swap_remove(edges: &mut Vec<AdjEntry>, index: &mut HashMap<NodeId, usize>, nbr: NodeId) -> bool {
    let Some(o) = index.remove(&nbr) else {
        return false;
    };
    edges.swap_remove(o);
    if let Some(moved) = edges.get(o) {
        index.insert(moved.nbr, o);
    }
    true
}

#[derive(Clone, Debug, Default)]
pub struct DynGraph {
    nodes: Vec<NodeAdjacency>,
    watermark: Option<Seq>,
    edge_count: usize,
}

/// JSON debug dump: `{nodes, edges: [{u, v, w, t}]}`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GraphDump {
    pub nodes: usize,
    pub edges: Vec<DumpEdge>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DumpEdge {
    pub u: NodeId,
    pub v: NodeId,
    pub w: f64,
    pub t: f64,
}

impl DynGraph {
    pub fn new(num_nodes: usize) -> Self {
        DynGraph { nodes: vec![NodeAdjacency::default(); num_nodes], watermark: None, edge_count: 0 }
    }

    /// Builds `G0` of a stream: its initial nodes and edges, no events applied.
    pub fn from_stream(stream: &GraphStream) -> Result<Self, GraphError> {
        let mut g = DynGraph::new(stream.num_nodes);
        for e in &stream.initial_edges {
            g.add_edge(e.u, e.v, e.weight, e.t)?;
        }
        Ok(g)
    }

    pub fn num_nodes(&self) -> usize {
        self.nodes.len()
    }

    pub fn num_edges(&self) -> usize {
        self.edge_count
    }

    pub fn watermark(&self) -> Option<Seq> {
        self.watermark
    }

    fn node(&self, n: NodeId) -> Result<&NodeAdjacency, GraphError> {
        self.nodes.get(n as usize).ok_or(GraphError::UnknownNode(n))
    }

    fn check(&self, n: NodeId) -> Result<(), GraphError> {
        self.node(n).map(|_| ())
    }

    pub fn adjacency(&self, n: NodeId) -> Result<&NodeAdjacency, GraphError> {
        self.node(n)
    }

    pub fn add_node(&mut self) -> NodeId {
        self.nodes.push(NodeAdjacency::default());
        (self.nodes.len() - 1) as NodeId
    }

    /// Inserts `u -> v`, or overwrites weight and timestamp if it exists.
    pub fn add_edge(&mut self, u: NodeId, v: NodeId, w: f64, t: f64) -> Result<(), GraphError> {
        self.check(u)?;
        self.check(v)?;
        if u == v {
            return Err(GraphError::SelfLoop(u));
        }
        let existed = self.has_edge(u, v);
        let src = &mut self.nodes[u as usize];
        upsert(&mut src.out_edges, &mut src.out_index, AdjEntry { nbr: v, weight: w, t });
        let dst = &mut self.nodes[v as usize];
        upsert(&mut dst.in_edges, &mut dst.in_index, AdjEntry { nbr: u, weight: w, t });
        if !existed {
            self.edge_count += 1;
        }
        Ok(())
    }

    pub fn delete_edge(&mut self, u: NodeId, v: NodeId) -> Result<(), GraphError> {
        self.check(u)?;
        self.check(v)?;
        if !self.has_edge(u, v) {
            return Err(GraphError::EdgeNotFound(u, v));
        }
        let src = &mut self.nodes[u as usize];
        swap_remove(&mut src.out_edges, &mut src.out_index, v);
        let dst = &mut self.nodes[v as usize];
        swap_remove(&mut dst.in_edges, &mut dst.in_index, u);
        self.edge_count -= 1;
        Ok(())
    }

    pub fn has_edge(&self, u: NodeId, v: NodeId) -> bool {
        self.nodes.get(u as usize).is_some_and(|n| n.out_index.contains_key(&v))
    }

    pub fn edge(&self, u: NodeId, v: NodeId) -> Option<&AdjEntry> {
        let node = self.nodes.get(u as usize)?;
        node.out_index.get(&v).map(|&o| &node.out_edges[o])
    }

    /// Copy of a node's neighbor entries in storage order. `Both` is the
    /// incoming list followed by the outgoing one, duplicates retained.
    pub fn neighbors(&self, n: NodeId, dir: Direction) -> Result<Vec<AdjEntry>, GraphError> {
        let node = self.node(n)?;
        Ok(match dir {
            Direction::In => node.in_edges.clone(),
            Direction::Out => node.out_edges.clone(),
            Direction::Both => node.in_edges.iter().chain(&node.out_edges).copied().collect(),
        })
    }

    /// Latest interaction time `t_n`; 0 for never-touched nodes.
    pub fn query_time(&self, n: NodeId) -> Result<f64, GraphError> {
        Ok(self.node(n)?.last_time())
    }

    /// Time of the latest touch strictly before `seq` (0 if none). This is
    /// what an event at `seq` sees as the node's previous event time, even
    /// when later events have already been analysed.
    pub fn time_before(&self, n: NodeId, seq: Seq) -> Result<f64, GraphError> {
        let touches = &self.node(n)?.touches;
        let idx = touches.partition_point(|&(s, _)| s < seq);
        Ok(if idx == 0 { 0.0 } else { touches[idx - 1].1 })
    }

    /// Records that the event at `seq` touched `n` at time `t`. Idempotent per
    /// `(n, seq)`.
    pub fn touch_time(&mut self, n: NodeId, seq: Seq, t: f64) -> Result<(), GraphError> {
        self.check(n)?;
        let touches = &mut self.nodes[n as usize].touches;
        match touches.binary_search_by_key(&seq, |&(s, _)| s) {
            Ok(i) => touches[i].1 = t,
            Err(i) => touches.insert(i, (seq, t)),
        }
        Ok(())
    }

    /// Applies the structural side of an event and advances the watermark.
    pub fn apply_structural(&mut self, e: &Event) -> Result<(), GraphError> {
        if let Some(w) = self.watermark {
            if e.seq <= w {
                return Err(GraphError::StaleEvent { seq: e.seq, watermark: w });
            }
        }
        match e.kind {
            EventKind::AddEdge => self.add_edge(e.u, e.v, e.weight, e.t)?,
            EventKind::DeleteEdge => self.delete_edge(e.u, e.v)?,
            EventKind::AddNode => {
                let expected = self.nodes.len() as NodeId;
                if e.u != expected {
                    return Err(GraphError::InvalidAddNode { expected, got: e.u });
                }
                self.add_node();
            }
            EventKind::Interact => {
                self.check(e.u)?;
                self.check(e.v)?;
                if let Some(entry) = self.edge(e.u, e.v).copied() {
                    self.add_edge(e.u, e.v, entry.weight, e.t)?;
                }
            }
            EventKind::UpdateFeature => {
                self.check(e.u)?;
                self.check(e.v)?;
            }
        }
        self.watermark = Some(e.seq);
        Ok(())
    }

    /// Applies `e` only if it lies beyond the watermark. Returns whether it
    /// was applied.
    pub fn apply_if_new(&mut self, e: &Event) -> Result<bool, GraphError> {
        if self.watermark.is_some_and(|w| e.seq <= w) {
            return Ok(false);
        }
        self.apply_structural(e)?;
        Ok(true)
    }

    /// k-hop neighbourhood of the given roots over in- and out-edges, roots
    /// included. Sorted ascending.
    pub fn k_hop(&self, roots: &[NodeId], k: usize) -> Result<Vec<NodeId>, GraphError> {
        let mut seen: Vec<NodeId> = Vec::new();
        let mut frontier: Vec<NodeId> = Vec::new();
        for &r in roots {
            self.check(r)?;
            if !seen.contains(&r) {
                seen.push(r);
                frontier.push(r);
            }
        }
        let mut visited: std::collections::HashSet<NodeId> = seen.iter().copied().collect();
        for _ in 0..k {
            let mut next = Vec::new();
            for &n in &frontier {
                let node = &self.nodes[n as usize];
                for entry in node.in_edges.iter().chain(&node.out_edges) {
                    if visited.insert(entry.nbr) {
                        next.push(entry.nbr);
                    }
                }
            }
            if next.is_empty() {
                break;
            }
            seen.extend_from_slice(&next);
            frontier = next;
        }
        seen.sort_unstable();
        Ok(seen)
    }

    /// The event-affected node set `V^k_e` on the current topology.
    pub fn affected_set(&self, e: &Event, k: usize) -> Result<Vec<NodeId>, GraphError> {
        self.k_hop(&e.endpoints(), k)
    }

    /// Captures the k-hop event subgraph (the event must already be applied),
    /// computes `Δt_u`, `Δt_v` from the endpoints' previous event times and
    /// then records the event time on both endpoints.
    pub fn get_subgraph(&mut self, e: &Event, k: usize) -> Result<EventSubgraph, GraphError> {
        let affected = self.affected_set(e, k)?;
        let adjacency = affected
            .iter()
            .map(|&n| {
                let node = &self.nodes[n as usize];
                NodeSnapshot {
                    node: n,
                    in_edges: node.in_edges.clone(),
                    out_edges: node.out_edges.clone(),
                }
            })
            .collect();
        let delta_u = (e.t - self.time_before(e.u, e.seq)?).max(0.0);
        let delta_v = (e.t - self.time_before(e.v, e.seq)?).max(0.0);
        self.touch_time(e.u, e.seq, e.t)?;
        self.touch_time(e.v, e.seq, e.t)?;
        Ok(EventSubgraph {
            event: e.clone(),
            affected,
            adjacency,
            delta_u,
            delta_v,
            num_nodes: self.nodes.len(),
        })
    }

    pub fn dump(&self) -> GraphDump {
        let edges = self
            .nodes
            .iter()
            .enumerate()
            .flat_map(|(u, node)| {
                node.out_edges.iter().map(move |e| DumpEdge { u: u as NodeId, v: e.nbr, w: e.weight, t: e.t })
            })
            .collect();
        GraphDump { nodes: self.nodes.len(), edges }
    }
}

/// True when two ascending node lists share an element.
pub fn sorted_intersects(a: &[NodeId], b: &[NodeId]) -> bool {
    let (mut i, mut j) = (0, 0);
    while i < a.len() && j < b.len() {
        match a[i].cmp(&b[j]) {
            std::cmp::Ordering::Less => i += 1,
            std::cmp::Ordering::Greater => j += 1,
            std::cmp::Ordering::Equal => return true,
        }
    }
    false
}
