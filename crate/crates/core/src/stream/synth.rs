//! Synthetic streams with planted spatial locality.
//!
//! Events come in clusters: a run of consecutive events whose endpoints are
//! drawn from a small node pool. Every event after the first in a cluster
//! reuses a node already seen in that cluster, and consecutive pools are
//! disjoint whenever the node count allows it.

use std::collections::HashSet;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{Event, EventKind, GraphStream, StreamError};
use crate::{NodeId, Seq};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SynthConfig {
    pub num_nodes: usize,
    pub num_events: usize,
    /// Inclusive bounds on cluster length.
    pub cluster_size_range: (usize, usize),
    pub cluster_node_pool: usize,
    pub seed: u64,
}

/// One planted cluster, as logged by the generator.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ClusterSpan {
    pub start: Seq,
    pub len: usize,
    pub pool: Vec<NodeId>,
}

impl ClusterSpan {
    pub fn end(&self) -> Seq {
        self.start + self.len
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct SyntheticStream {
    pub stream: GraphStream,
    pub clusters: Vec<ClusterSpan>,
}

impl SyntheticStream {
    /// Start positions of every cluster after the first, plus the stream end.
    pub fn boundaries(&self) -> Vec<Seq> {
        self.clusters.iter().map(ClusterSpan::end).collect()
    }
}

fn draw_pool(
    rng: &mut ChaCha8Rng,
    num_nodes: usize,
    size: usize,
    avoid: &HashSet<NodeId>,
) -> Vec<NodeId> {
    let avoid_ok = num_nodes >= size + avoid.len();
    let mut chosen = HashSet::with_capacity(size);
    let mut pool = Vec::with_capacity(size);
    while pool.len() < size {
        let n = rng.random_range(0..num_nodes) as NodeId;
        if avoid_ok && avoid.contains(&n) {
            continue;
        }
        if chosen.insert(n) {
            pool.push(n);
        }
    }
    pool
}

pub fn generate_synthetic_stream(cfg: &SynthConfig) -> Result<SyntheticStream, StreamError> {
    let (min_len, max_len) = cfg.cluster_size_range;
    if cfg.cluster_node_pool < 2 || cfg.num_nodes < cfg.cluster_node_pool {
        return Err(StreamError::BadGeneratorArgs(format!(
            "need num_nodes ({}) >= cluster_node_pool ({}) >= 2",
            cfg.num_nodes, cfg.cluster_node_pool
        )));
    }
    if min_len == 0 || min_len > max_len {
        return Err(StreamError::BadGeneratorArgs(format!(
            "invalid cluster size range [{min_len}, {max_len}]"
        )));
    }
    if cfg.num_nodes > NodeId::MAX as usize {
        return Err(StreamError::BadGeneratorArgs("num_nodes exceeds id range".into()));
    }

    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut events = Vec::with_capacity(cfg.num_events);
    let mut clusters = Vec::new();
    let mut edges: HashSet<(NodeId, NodeId)> = HashSet::new();
    let mut prev_pool: HashSet<NodeId> = HashSet::new();

    while events.len() < cfg.num_events {
        let start = events.len();
        let len = rng.random_range(min_len..=max_len).min(cfg.num_events - start);
        let pool = draw_pool(&mut rng, cfg.num_nodes, cfg.cluster_node_pool, &prev_pool);
        let mut seen: Vec<NodeId> = Vec::new();

        for _ in 0..len {
            let (a, b) = if seen.is_empty() {
                let a = pool[rng.random_range(0..pool.len())];
                let mut b = a;
                while b == a {
                    b = pool[rng.random_range(0..pool.len())];
                }
                (a, b)
            } else {
                let a = seen[rng.random_range(0..seen.len())];
                let mut b = a;
                while b == a {
                    b = pool[rng.random_range(0..pool.len())];
                }
                (a, b)
            };
            let (u, v) = if rng.random_bool(0.5) { (a, b) } else { (b, a) };
            for n in [u, v] {
                if !seen.contains(&n) {
                    seen.push(n);
                }
            }
            let kind = if edges.insert((u, v)) { EventKind::AddEdge } else { EventKind::Interact };
            let seq = events.len();
            events.push(Event::new(seq, u, v, (seq + 1) as f64, kind));
        }

        prev_pool = pool.iter().copied().collect();
        clusters.push(ClusterSpan { start, len, pool });
    }

    Ok(SyntheticStream { stream: GraphStream::new(cfg.num_nodes, events), clusters })
}
