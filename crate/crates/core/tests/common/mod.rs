#![allow(dead_code)]

pub mod deps_oracle;
pub mod gradcheck;
pub mod storage;

use std::collections::HashSet;

use dgnn_core::deps::{build_dep_graph, AnalyzedWindow, DepConfig, DepMode, DepSearch};
use dgnn_core::embed::EmbeddingStore;
use dgnn_core::graph::{DynGraph, EventSubgraph};
use dgnn_core::model::{process_event, DynModel, EventCtx, VersionPins};
use dgnn_core::stream::{Event, EventKind, GraphStream, InitialEdge};
use dgnn_core::tensor::Var;
use dgnn_core::{NodeId, Real};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

fn edge(u: NodeId, v: NodeId) -> InitialEdge {
    InitialEdge { u, v, weight: 1.0, t: 0.0 }
}

fn ev(seq: usize, u: NodeId, v: NodeId, kind: EventKind) -> Event {
    Event::new(seq, u, v, (seq + 1) as f64, kind)
}

/// Five events over nodes 1..=10. e4 interacts on a pair without an edge,
/// so it leaves the topology unchanged.
pub fn two_chain_stream() -> GraphStream {
    use EventKind::*;
    let events = vec![
        ev(0, 1, 2, AddEdge),
        ev(1, 5, 8, AddEdge),
        ev(2, 1, 2, Interact),
        ev(3, 7, 8, Interact),
        ev(4, 7, 9, AddEdge),
    ];
    let mut s = GraphStream::new(11, events);
    s.initial_edges = vec![edge(1, 3), edge(2, 4), edge(8, 6), edge(9, 10)];
    s
}

/// Nine events over three disjoint node groups, interleaved so the chains
/// are {e1,e4,e6}, {e2,e5,e7,e8} and {e3,e9}.
pub fn three_chain_stream() -> GraphStream {
    use EventKind::AddEdge;
    let pairs = [(1, 2), (11, 12), (21, 22), (2, 3), (12, 13), (3, 4), (13, 14), (14, 15), (22, 23)];
    let events = pairs.iter().enumerate().map(|(i, &(u, v))| ev(i, u, v, AddEdge)).collect();
    GraphStream::new(24, events)
}

pub fn analyze(stream: &GraphStream, radius: usize, mode: DepMode, search: DepSearch) -> (DynGraph, AnalyzedWindow) {
    let mut g = DynGraph::from_stream(stream).unwrap();
    let cfg = DepConfig { k: 1, radius, mode, search };
    let aw = build_dep_graph(&stream.events, &mut g, &cfg).unwrap();
    (g, aw)
}

/// Chains as sorted lists of 1-based event labels, sorted by first label.
pub fn chain_labels(aw: &AnalyzedWindow) -> Vec<Vec<usize>> {
    let mut out: Vec<Vec<usize>> = aw
        .graph
        .chains()
        .into_iter()
        .map(|c| {
            let mut c: Vec<usize> = c.into_iter().map(|i| aw.graph.seq(i) + 1).collect();
            c.sort_unstable();
            c
        })
        .collect();
    out.sort();
    out
}

/// A valid random stream: mostly edge insertions, plus interactions,
/// deletions of existing edges and single-node feature updates.
pub fn random_stream(seed: u64, num_nodes: usize, num_events: usize) -> GraphStream {
    let mut r = rng(seed);
    let mut edges: Vec<(NodeId, NodeId)> = Vec::new();
    let mut present: HashSet<(NodeId, NodeId)> = HashSet::new();
    let mut events = Vec::with_capacity(num_events);
    let n = num_nodes as NodeId;
    for seq in 0..num_events {
        let roll: f64 = r.random();
        let pair = |r: &mut ChaCha8Rng| {
            let u = r.random_range(0..n);
            let mut v = r.random_range(0..n);
            while v == u {
                v = r.random_range(0..n);
            }
            (u, v)
        };
        let e = if roll < 0.06 && !edges.is_empty() {
            let (u, v) = edges.swap_remove(r.random_range(0..edges.len()));
            present.remove(&(u, v));
            ev(seq, u, v, EventKind::DeleteEdge)
        } else if roll < 0.10 {
            let u = r.random_range(0..n);
            ev(seq, u, u, EventKind::UpdateFeature)
        } else if roll < 0.30 {
            let (u, v) = if !edges.is_empty() && r.random_bool(0.5) {
                edges[r.random_range(0..edges.len())]
            } else {
                pair(&mut r)
            };
            ev(seq, u, v, EventKind::Interact)
        } else {
            let (u, v) = pair(&mut r);
            if present.insert((u, v)) {
                edges.push((u, v));
            }
            ev(seq, u, v, EventKind::AddEdge)
        };
        events.push(e);
    }
    GraphStream::new(num_nodes, events)
}

/// Loss of one event exactly as training computes it (mean BCE over the
/// positive and its negatives), evaluated on a fresh tape.
pub struct EventLoss {
    pub loss: Real,
    pub samples: usize,
    /// Gradient per parameter tensor.
    pub param_grads: Vec<Vec<Real>>,
    /// Gradient per read node, summed over all reads of that node.
    pub emb_grads: Vec<(NodeId, Vec<Real>)>,
}

/// `base` and `pins` select the versions read; reads above `base` are
/// differentiable.
pub fn event_loss(
    model: &dyn DynModel,
    store: &EmbeddingStore,
    sub: &EventSubgraph,
    negatives: &[NodeId],
    base: &[u32],
    pins: &VersionPins,
) -> EventLoss {
    let mut cx = EventCtx::new(sub, store, model.params(), base, pins, true);
    let out = process_event(model, &mut cx).unwrap();
    let mut losses: Vec<Var> = Vec::new();
    if let Some(pos) = out.positive {
        losses.push(cx.tape.bce_with_logits(pos, 1.0).unwrap());
        for &w in negatives {
            let z_w = cx.emb_at_base(w).unwrap();
            let logit = model.predict(&mut cx, out.z_u, z_w).unwrap();
            losses.push(cx.tape.bce_with_logits(logit, 0.0).unwrap());
        }
    }
    assert!(!losses.is_empty(), "event produced no samples");
    let total = cx.tape.sum(&losses).unwrap();
    let mean = cx.tape.scale(total, 1.0 / losses.len() as Real);
    let loss = cx.tape.scalar(mean);
    let (tape, reads, _, params) = cx.finish();
    let mut grads = tape.backward(mean).unwrap();
    let mut param_grads: Vec<Vec<Real>> = model.params().iter().map(|p| vec![0.0; p.len()]).collect();
    for (idx, var) in params {
        if let Some(g) = grads.take(var) {
            param_grads[idx].iter_mut().zip(&g).for_each(|(a, b)| *a += b);
        }
    }
    let mut emb_grads: Vec<(NodeId, Vec<Real>)> = Vec::new();
    for r in reads {
        let Some(g) = grads.get(r.var).map(<[Real]>::to_vec) else { continue };
        match emb_grads.iter_mut().find(|(n, _)| *n == r.node) {
            Some((_, acc)) => acc.iter_mut().zip(&g).for_each(|(a, b)| *a += b),
            None => emb_grads.push((r.node, g)),
        }
    }
    EventLoss { loss, samples: losses.len(), param_grads, emb_grads }
}

/// `|a - b| / max(|a|, |b|)` over whole vectors; 0 when both vanish.
pub fn rel_err(a: &[Real], b: &[Real]) -> Real {
    let norm = |x: &[Real]| x.iter().map(|v| v * v).sum::<Real>().sqrt();
    let diff: Vec<Real> = a.iter().zip(b).map(|(x, y)| x - y).collect();
    let scale = norm(a).max(norm(b));
    if scale < 1e-12 {
        norm(&diff)
    } else {
        norm(&diff) / scale
    }
}

/// Central difference of `f` around `x` along every coordinate.
pub fn central_diff(x: &[Real], h: Real, mut f: impl FnMut(&[Real]) -> Real) -> Vec<Real> {
    let mut x = x.to_vec();
    (0..x.len())
        .map(|i| {
            let orig = x[i];
            x[i] = orig + h;
            let plus = f(&x);
            x[i] = orig - h;
            let minus = f(&x);
            x[i] = orig;
            (plus - minus) / (2.0 * h)
        })
        .collect()
}

/// Store whose nodes hold `z0` at version 0 and `z1` at version 1.
pub fn two_version_store(z0: &[Vec<Real>], z1: &[Vec<Real>]) -> EmbeddingStore {
    let dim = z0[0].len();
    let store = EmbeddingStore::from_initial(dim, z0.iter().map(|x| x.clone().into()).collect());
    for (n, x) in z1.iter().enumerate() {
        store.update_emb(n as NodeId, x.clone().into()).unwrap();
    }
    store
}

pub fn gaussian_rows(r: &mut ChaCha8Rng, rows: usize, dim: usize, std: Real) -> Vec<Vec<Real>> {
    let normal = rand_distr::Normal::new(0.0, std).unwrap();
    (0..rows).map(|_| (0..dim).map(|_| rand_distr::Distribution::sample(&normal, r)).collect()).collect()
}

/// Relative difference `|a - b| / max(|a|, |b|, tiny)`.
pub fn rel_close(a: Real, b: Real, tol: Real) -> bool {
    let scale = a.abs().max(b.abs()).max(1e-300);
    (a - b).abs() / scale <= tol || a == b
}

/// What a training run leaves behind, for equality checks.
#[derive(Debug, PartialEq)]
pub struct RunResult {
    pub losses: Vec<Real>,
    pub aucs: Vec<Option<Real>>,
    pub embeddings: Vec<Vec<Real>>,
    pub params: Vec<Vec<Real>>,
}

pub fn small_config(mode: dgnn_core::train::TrainMode) -> dgnn_core::train::TrainConfig {
    dgnn_core::train::TrainConfig {
        mode,
        window: 12,
        stride: 6,
        min_window: 6,
        max_window: 16,
        epochs: 2,
        negatives: 2,
        ..Default::default()
    }
}

pub fn train_run(
    stream: &GraphStream,
    model_cfg: &dgnn_core::model::ModelConfig,
    cfg: &dgnn_core::train::TrainConfig,
) -> RunResult {
    let mut model = dgnn_core::model::build_model(model_cfg).unwrap();
    let out = if cfg.pipeline {
        dgnn_core::train::run_pipeline(stream, &mut *model, cfg).unwrap()
    } else {
        dgnn_core::train::train_stream(stream, &mut *model, cfg).unwrap()
    };
    RunResult {
        losses: out.records.iter().map(|r| r.loss).collect(),
        aucs: out.records.iter().map(|r| r.auc).collect(),
        embeddings: (0..out.store.num_nodes() as NodeId).map(|n| out.store.latest_emb(n).unwrap().to_vec()).collect(),
        params: model.params().iter().map(|p| p.data.to_vec()).collect(),
    }
}

/// Largest relative difference between two runs' losses and embeddings.
pub fn max_rel_diff(a: &RunResult, b: &RunResult) -> Real {
    let rel = |x: Real, y: Real| {
        let s = x.abs().max(y.abs());
        if s == 0.0 { 0.0 } else { (x - y).abs() / s }
    };
    assert_eq!(a.losses.len(), b.losses.len());
    let mut worst: Real = 0.0;
    for (x, y) in a.losses.iter().zip(&b.losses) {
        worst = worst.max(rel(*x, *y));
    }
    for (u, v) in a.embeddings.iter().zip(&b.embeddings) {
        worst = worst.max(rel_err(u, v));
    }
    worst
}

/// Outcome of running adaptive windows over a planted-locality stream.
pub struct CaptureReport {
    pub windows: usize,
    pub aligned: usize,
    pub mean_len: usize,
    /// Clusters cut by fixed windows of `mean_len` events.
    pub fixed_splits: usize,
}

pub fn capture_report(seed: u64, min: usize, max: usize, events: usize) -> CaptureReport {
    use dgnn_core::stream::{generate_synthetic_stream, SynthConfig};
    use dgnn_core::window::{adaptive_windows, fixed_windows};

    let synth = generate_synthetic_stream(&SynthConfig {
        num_nodes: 400,
        num_events: events,
        cluster_size_range: (min, max),
        cluster_node_pool: 6,
        seed,
    })
    .unwrap();
    let bounds: HashSet<usize> = synth.boundaries().into_iter().collect();
    let m = synth.stream.events.len();
    let ws = adaptive_windows(&synth.stream.events, min, max, 1.0);
    let aligned = ws.iter().filter(|w| bounds.contains(&w.end)).count();
    let mean_len = ((m as Real / ws.len() as Real).round() as usize).max(1);
    let cuts: Vec<usize> = fixed_windows(m, mean_len, mean_len).iter().map(|w| w.end).collect();
    let fixed_splits = synth
        .clusters
        .iter()
        .filter(|c| cuts.iter().any(|&e| e > c.start && e < c.end()))
        .count();
    CaptureReport { windows: ws.len(), aligned, mean_len, fixed_splits }
}
