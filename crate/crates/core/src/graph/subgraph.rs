use serde::{Deserialize, Serialize};

use super::AdjEntry;
use crate::stream::Event;
use crate::NodeId;

/// Adjacency of one affected node, frozen at capture time.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NodeSnapshot {
    pub node: NodeId,
    pub in_edges: Vec<AdjEntry>,
    pub out_edges: Vec<AdjEntry>,
}

/// The k-hop event-affected subgraph of one event, deep-copied so training
/// never reads the mutating topology.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EventSubgraph {
    pub event: Event,
    /// `V^k_e`, ascending.
    pub affected: Vec<NodeId>,
    /// One entry per affected node, same order as `affected`.
    pub adjacency: Vec<NodeSnapshot>,
    pub delta_u: f64,
    pub delta_v: f64,
    /// Graph node count at capture time.
    pub num_nodes: usize,
}

impl EventSubgraph {
    pub fn contains(&self, n: NodeId) -> bool {
        self.affected.binary_search(&n).is_ok()
    }

    pub fn node(&self, n: NodeId) -> Option<&NodeSnapshot> {
        self.affected.binary_search(&n).ok().map(|i| &self.adjacency[i])
    }

    pub fn in_neighbors(&self, n: NodeId) -> Vec<NodeId> {
        self.node(n).map(|s| s.in_edges.iter().map(|e| e.nbr).collect()).unwrap_or_default()
    }

    pub fn out_neighbors(&self, n: NodeId) -> Vec<NodeId> {
        self.node(n).map(|s| s.out_edges.iter().map(|e| e.nbr).collect()).unwrap_or_default()
    }

    /// In- and out-neighbours of `n`, deduplicated and ascending.
    pub fn neighbors(&self, n: NodeId) -> Vec<NodeId> {
        let mut out: Vec<NodeId> = match self.node(n) {
            Some(s) => s.in_edges.iter().chain(&s.out_edges).map(|e| e.nbr).collect(),
            None => Vec::new(),
        };
        out.sort_unstable();
        out.dedup();
        out
    }

    pub fn delta_for(&self, n: NodeId) -> f64 {
        if n == self.event.u {
            self.delta_u
        } else {
            self.delta_v
        }
    }
}
