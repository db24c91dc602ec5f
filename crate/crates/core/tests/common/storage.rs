//! Reference implementations for the adjacency store and the
//! multi-version embedding store.

use std::collections::BTreeMap;

use dgnn_core::embed::{EmbeddingStore, Vector};
use dgnn_core::graph::{AdjEntry, Direction, DynGraph};
use dgnn_core::NodeId;
use rand::Rng;

/// Map-of-maps reference adjacency: `out[u][v] = (w, t)`.
#[derive(Default)]
pub struct RefGraph {
    pub out: BTreeMap<NodeId, BTreeMap<NodeId, (f64, f64)>>,
}

impl RefGraph {
    pub fn add(&mut self, u: NodeId, v: NodeId, w: f64, t: f64) {
        self.out.entry(u).or_default().insert(v, (w, t));
    }

    pub fn delete(&mut self, u: NodeId, v: NodeId) -> bool {
        self.out.get_mut(&u).is_some_and(|m| m.remove(&v).is_some())
    }

    pub fn out_of(&self, u: NodeId) -> Vec<(NodeId, f64, f64)> {
        self.out.get(&u).map(|m| m.iter().map(|(&v, &(w, t))| (v, w, t)).collect()).unwrap_or_default()
    }

    pub fn in_of(&self, v: NodeId) -> Vec<(NodeId, f64, f64)> {
        let mut r: Vec<_> = self
            .out
            .iter()
            .filter_map(|(&u, m)| m.get(&v).map(|&(w, t)| (u, w, t)))
            .collect();
        r.sort_by_key(|x| x.0);
        r
    }

    pub fn edges(&self) -> usize {
        self.out.values().map(BTreeMap::len).sum()
    }
}

pub fn sorted(entries: Vec<AdjEntry>) -> Vec<(NodeId, f64, f64)> {
    let mut r: Vec<_> = entries.into_iter().map(|e| (e.nbr, e.weight, e.t)).collect();
    r.sort_by_key(|x| x.0);
    r
}

pub fn assert_node_matches(g: &DynGraph, r: &RefGraph, n: NodeId) {
    assert_eq!(sorted(g.neighbors(n, Direction::Out).unwrap()), r.out_of(n), "out-edges of {n}");
    assert_eq!(sorted(g.neighbors(n, Direction::In).unwrap()), r.in_of(n), "in-edges of {n}");
}

#[derive(Clone, Debug)]
pub enum Op {
    Add(NodeId, NodeId, f64),
    Delete(NodeId, NodeId),
    Query(NodeId, NodeId),
}

pub fn apply(g: &mut DynGraph, r: &mut RefGraph, op: &Op, t: f64) {
    match *op {
        Op::Add(u, v, w) => {
            let res = g.add_edge(u, v, w, t);
            if u == v {
                assert!(res.is_err());
            } else {
                res.unwrap();
                r.add(u, v, w, t);
            }
        }
        Op::Delete(u, v) => {
            let existed = r.delete(u, v);
            assert_eq!(g.delete_edge(u, v).is_ok(), existed);
        }
        Op::Query(u, v) => {
            let expect = r.out.get(&u).and_then(|m| m.get(&v)).copied();
            assert_eq!(g.has_edge(u, v), expect.is_some());
            assert_eq!(g.edge(u, v).map(|e| (e.weight, e.t)), expect);
        }
    }
    assert_eq!(g.num_edges(), r.edges());
}

/// 10^4 random add/delete/query operations checked op by op.
pub fn run_graph_ops(seed: u64, steps: usize) {
    let n = 40u32;
    let mut rng = super::rng(seed);
    let mut g = DynGraph::new(n as usize);
    let mut r = RefGraph::default();
    let mut existing: Vec<(NodeId, NodeId)> = Vec::new();
    for step in 0..steps {
        let u = rng.random_range(0..n);
        let v = rng.random_range(0..n);
        let op = match rng.random_range(0..10) {
            0..=4 => Op::Add(u, v, rng.random_range(0.5..2.0)),
            5..=7 if !existing.is_empty() && rng.random_bool(0.7) => {
                let (a, b) = existing[rng.random_range(0..existing.len())];
                Op::Delete(a, b)
            }
            5..=7 => Op::Delete(u, v),
            _ => Op::Query(u, v),
        };
        apply(&mut g, &mut r, &op, step as f64);
        if let Op::Add(a, b, _) = op {
            if a != b {
                existing.push((a, b));
            }
        }
        for x in [u, v] {
            assert_node_matches(&g, &r, x);
        }
        if let Op::Delete(a, b) | Op::Add(a, b, _) = op {
            assert_node_matches(&g, &r, a);
            assert_node_matches(&g, &r, b);
        }
    }
    for x in 0..n {
        assert_node_matches(&g, &r, x);
    }
    assert!(g.add_edge(n, 0, 1.0, 0.0).is_err());
    assert!(g.neighbors(n, Direction::In).is_err());
}

/// Full-snapshot reference: every version of every node kept verbatim.
pub struct RefStore {
    pub history: Vec<Vec<Vector>>,
}

impl RefStore {
    pub fn from(store: &EmbeddingStore) -> Self {
        RefStore { history: (0..store.num_nodes() as NodeId).map(|n| vec![store.initial(n).unwrap()]).collect() }
    }
}

pub fn random_vec(rng: &mut impl Rng, dim: usize) -> Vector {
    (0..dim).map(|_| rng.random_range(-1.0..1.0)).collect::<Vec<f64>>().into()
}

/// Random writes and historical reads against a store that keeps every
/// version verbatim. Returns the number of writes.
pub fn run_version_store(seed: u64, steps: usize) -> usize {
    let (nodes, dim) = (30, 5);
    let mut rng = super::rng(seed);
    let store = EmbeddingStore::init_store(nodes, dim, 9);
    let mut reference = RefStore::from(&store);
    let mut updates = 0;
    for _ in 0..steps {
        let n = rng.random_range(0..nodes as NodeId);
        if rng.random_bool(0.5) {
            let x = random_vec(&mut rng, dim);
            let v = store.update_emb(n, x.clone()).unwrap();
            reference.history[n as usize].push(x);
            updates += 1;
            assert_eq!(v as usize, reference.history[n as usize].len() - 1);
        } else {
            let h = &reference.history[n as usize];
            let version = rng.random_range(0..h.len());
            assert_eq!(store.get_version(n, version as u32).unwrap(), h[version]);
            assert_eq!(store.latest_emb(n).unwrap(), *h.last().unwrap());
            assert!(store.get_version(n, h.len() as u32).is_err());
        }
        assert_eq!(store.stored_vectors(), nodes + updates);
    }
    for n in 0..nodes as NodeId {
        let h = &reference.history[n as usize];
        for (v, x) in h.iter().enumerate() {
            assert_eq!(store.get_version(n, v as u32).unwrap(), *x);
        }
    }
    updates
}
