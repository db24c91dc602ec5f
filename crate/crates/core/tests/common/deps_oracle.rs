//! Independent dependency oracle: replays topology on a plain edge set and
//! closes the pairwise conflict relation with Warshall.

use std::collections::{BTreeSet, HashSet};

use dgnn_core::deps::{BitMatrix, DepMode};
use dgnn_core::stream::{EventKind, GraphStream};
use dgnn_core::NodeId;
use rand::Rng;

use super::random_stream;

/// Replays the stream on a plain edge set and derives every event's 1-hop
/// read set and its write set for the given radius.
pub fn reference_sets(stream: &GraphStream, radius: usize) -> (Vec<Vec<NodeId>>, Vec<Vec<NodeId>>) {
    let mut edges: HashSet<(NodeId, NodeId)> = stream.initial_edges.iter().map(|e| (e.u, e.v)).collect();
    let mut affected = Vec::new();
    let mut updates = Vec::new();
    for e in &stream.events {
        match e.kind {
            EventKind::AddEdge => {
                edges.insert((e.u, e.v));
            }
            EventKind::DeleteEdge => {
                edges.remove(&(e.u, e.v));
            }
            _ => {}
        }
        let nbrs = |n: NodeId| -> BTreeSet<NodeId> {
            edges.iter().filter_map(|&(a, b)| if a == n { Some(b) } else if b == n { Some(a) } else { None }).collect()
        };
        let ends: BTreeSet<NodeId> = [e.u, e.v].into_iter().collect();
        let mut hop: BTreeSet<NodeId> = ends.clone();
        for &n in &ends {
            hop.extend(nbrs(n));
        }
        affected.push(hop.iter().copied().collect());
        updates.push(if radius == 0 { ends.into_iter().collect() } else { hop.into_iter().collect() });
    }
    (affected, updates)
}

/// Pairwise conflict test followed by Warshall, on plain boolean rows.
pub fn reference_closure(affected: &[Vec<NodeId>], updates: &[Vec<NodeId>], mode: DepMode) -> Vec<Vec<bool>> {
    let n = affected.len();
    let meets = |a: &[NodeId], b: &[NodeId]| a.iter().any(|x| b.contains(x));
    let mut m = vec![vec![false; n]; n];
    for i in 0..n {
        for j in 0..i {
            m[i][j] = meets(&affected[i], &updates[j])
                || (mode == DepMode::Symmetric && meets(&updates[i], &affected[j]));
        }
    }
    for k in 0..n {
        for i in 0..n {
            if m[i][k] {
                for j in 0..n {
                    if m[k][j] {
                        m[i][j] = true;
                    }
                }
            }
        }
    }
    m
}

pub fn to_rows(m: &BitMatrix) -> Vec<Vec<bool>> {
    (0..m.len()).map(|i| (0..m.len()).map(|j| m.get(i, j)).collect()).collect()
}

pub fn random_window(seed: u64) -> GraphStream {
    let mut r = super::rng(seed ^ 0xD1CE);
    let nodes = r.random_range(4..48);
    let events = r.random_range(1..=64);
    random_stream(seed, nodes, events)
}
