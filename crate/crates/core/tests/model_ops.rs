mod common;

use common::analyze;
use dgnn_core::deps::{DepMode, DepSearch};
use dgnn_core::embed::EmbeddingStore;
use dgnn_core::model::{build_model, process_event, DynModel, EventCtx, ModelConfig, ModelKind, VersionPins};
use dgnn_core::stream::{Event, EventKind, GraphStream};
use dgnn_core::Real;

const DIM: usize = 3;

fn identity(n: usize) -> Vec<Real> {
    (0..n * n).map(|i| if i % (n + 1) == 0 { 1.0 } else { 0.0 }).collect()
}

fn set(model: &mut dyn DynModel, name: &str, data: Vec<Real>) {
    let i = model.params().index_of(name).unwrap();
    model.params_mut().set_data(i, data).unwrap();
}

fn zero_model(kind: ModelKind, decay: Real) -> Box<dyn DynModel> {
    build_model(&ModelConfig { kind, dim: DIM, zero_init: true, decay, ..ModelConfig::default() }).unwrap()
}

fn store_with(rows: &[[Real; DIM]]) -> EmbeddingStore {
    EmbeddingStore::from_initial(DIM, rows.iter().map(|r| r.to_vec().into()).collect())
}

/// Node 0 -> node 1 edge created by the event; node 2 hangs off node 1.
fn edge_stream() -> GraphStream {
    let mut s = GraphStream::new(3, vec![Event::new(0, 0, 1, 2.0, EventKind::AddEdge)]);
    s.initial_edges = vec![dgnn_core::stream::InitialEdge { u: 1, v: 2, weight: 1.0, t: 0.0 }];
    s
}

const Z: [[Real; DIM]; 3] = [[0.3, -0.2, 0.5], [-0.4, 0.1, 0.2], [0.6, 0.6, -0.1]];

fn tanh_vec(x: &[Real]) -> Vec<Real> {
    x.iter().map(|v| v.tanh()).collect()
}

fn close(a: &[Real], b: &[Real]) -> bool {
    a.len() == b.len() && a.iter().zip(b).all(|(x, y)| (x - y).abs() < 1e-12)
}

#[test]
fn aggregate_examples() {
    let s = edge_stream();
    let (_, aw) = analyze(&s, 0, DepMode::Paper, DepSearch::Scan);
    let sub = &aw.snapshots[0];
    let mut model = zero_model(ModelKind::DyrepLite, 0.1);
    set(&mut *model, "w_agg", identity(DIM));
    let store = store_with(&Z);
    let base = store.latest_versions();
    let pins = VersionPins::default();
    let mut cx = EventCtx::new(sub, &store, model.params(), &base, &pins, false);
    // Node 0 has no in-neighbours.
    let h0 = model.aggregate(&mut cx, 0).unwrap();
    assert_eq!(cx.tape.value(h0), &[0.0; DIM]);
    // Node 1's single in-neighbour is 0.
    let h1 = model.aggregate(&mut cx, 1).unwrap();
    assert!(close(cx.tape.value(h1), &tanh_vec(&Z[0])));
    assert!(model.aggregate(&mut cx, 2).is_err(), "only event nodes aggregate");
}

#[test]
fn update_emb_examples() {
    let s = edge_stream();
    let (_, aw) = analyze(&s, 0, DepMode::Paper, DepSearch::Scan);
    let sub = &aw.snapshots[0];
    let store = store_with(&Z);
    let base = store.latest_versions();
    let pins = VersionPins::default();

    let model = zero_model(ModelKind::DyrepLite, 0.1);
    let mut cx = EventCtx::new(sub, &store, model.params(), &base, &pins, false);
    let h = cx.tape.vector(vec![0.9, -0.3, 0.2], false);
    let z = model.update_emb(&mut cx, 0, h, h, 5.0).unwrap();
    assert_eq!(cx.tape.value(z), &[0.0; DIM]);

    let mut model = zero_model(ModelKind::DyrepLite, 0.1);
    set(&mut *model, "w_self", identity(DIM));
    let mut cx = EventCtx::new(sub, &store, model.params(), &base, &pins, false);
    let h = cx.tape.vector(vec![0.9, -0.3, 0.2], false);
    let z = model.update_emb(&mut cx, 1, h, h, 0.0).unwrap();
    assert!(close(cx.tape.value(z), &tanh_vec(&Z[1])));
    assert!(model.update_emb(&mut cx, 1, h, h, -1.0).is_err());
}

#[test]
fn both_endpoints_update_from_pre_event_values() {
    let s = edge_stream();
    let (_, aw) = analyze(&s, 0, DepMode::Paper, DepSearch::Scan);
    let mut model = zero_model(ModelKind::DyrepLite, 0.1);
    set(&mut *model, "w_agg", identity(DIM));
    set(&mut *model, "w_peer", identity(DIM));
    let store = store_with(&Z);
    let base = store.latest_versions();
    let pins = VersionPins::default();
    let mut cx = EventCtx::new(&aw.snapshots[0], &store, model.params(), &base, &pins, false);
    let out = process_event(&*model, &mut cx).unwrap();
    // z_0' = tanh(h_1) with h_1 = tanh(z_0) from before the event.
    let expected = tanh_vec(&tanh_vec(&Z[0]));
    assert!(close(cx.tape.value(out.z_u), &expected));
    assert!(close(&store.latest_emb(0).unwrap(), &expected));
    assert_eq!(out.touched, vec![0, 1]);
    assert_eq!(store.latest_version(2).unwrap(), 0);
}

#[test]
fn prop_update_examples() {
    let s = edge_stream();
    let (_, aw) = analyze(&s, 1, DepMode::Paper, DepSearch::Scan);
    let sub = &aw.snapshots[0];
    let store = store_with(&Z);
    let base = store.latest_versions();
    let pins = VersionPins::default();

    let mut model = zero_model(ModelKind::DiffusionLite, 0.1);
    set(&mut *model, "w_prop", identity(DIM));
    let mut cx = EventCtx::new(sub, &store, model.params(), &base, &pins, false);
    let z = cx.tape.vector(Z[0].to_vec(), false);
    let p = model.prop_update(&mut cx, 0, z, z).unwrap();
    assert_eq!(cx.tape.value(p), &[0.0; DIM], "no change, nothing propagates");

    let z_new = cx.tape.vector(vec![1.0, 0.0, -1.0], false);
    let p = model.prop_update(&mut cx, 0, z, z_new).unwrap();
    // dt of node 0 is 2 (first touch at t=2).
    let damp = (-0.1f64 * 2.0).exp();
    let expected: Vec<Real> = [1.0 - 0.3, 0.2, -1.5].iter().map(|d: &Real| damp * d.tanh()).collect();
    assert!(close(cx.tape.value(p), &expected));

    let mut frozen = zero_model(ModelKind::DiffusionLite, 1e9);
    set(&mut *frozen, "w_prop", identity(DIM));
    let mut cx = EventCtx::new(sub, &store, frozen.params(), &base, &pins, false);
    let (a, b) = (cx.tape.vector(Z[0].to_vec(), false), cx.tape.vector(vec![1.0, 1.0, 1.0], false));
    let p = frozen.prop_update(&mut cx, 0, a, b).unwrap();
    assert_eq!(cx.tape.value(p), &[0.0; DIM], "full decay");

    let dyrep = zero_model(ModelKind::DyrepLite, 0.1);
    let mut cx = EventCtx::new(sub, &store, dyrep.params(), &base, &pins, false);
    let a = cx.tape.vector(Z[0].to_vec(), false);
    assert!(dyrep.prop_update(&mut cx, 0, a, a).is_err());
}

#[test]
fn diffusion_writes_neighbours_and_nothing_else() {
    let mut s = edge_stream();
    s.num_nodes = 5;
    let (_, aw) = analyze(&s, 1, DepMode::Paper, DepSearch::Scan);
    let model = build_model(&ModelConfig { kind: ModelKind::DiffusionLite, dim: DIM, seed: 4, ..ModelConfig::default() })
        .unwrap();
    let store = EmbeddingStore::init_store(5, DIM, 3);
    let base = store.latest_versions();
    let pins = VersionPins::default();
    let mut cx = EventCtx::new(&aw.snapshots[0], &store, model.params(), &base, &pins, false);
    let out = process_event(&*model, &mut cx).unwrap();
    assert_eq!(out.touched, vec![0, 1, 2]);
    assert_eq!(store.latest_version(3).unwrap(), 0);
    assert_eq!(store.latest_version(4).unwrap(), 0);
    assert_eq!(store.latest_version(2).unwrap(), 1);
}

#[test]
fn predict_examples() {
    let s = edge_stream();
    let (_, aw) = analyze(&s, 0, DepMode::Paper, DepSearch::Scan);
    let sub = &aw.snapshots[0];
    let store = store_with(&Z);
    let base = store.latest_versions();
    let pins = VersionPins::default();

    let mut model = zero_model(ModelKind::DyrepLite, 0.1);
    set(&mut *model, "b_pred", vec![0.7]);
    let mut cx = EventCtx::new(sub, &store, model.params(), &base, &pins, false);
    let (a, b) = (cx.tape.vector(Z[0].to_vec(), false), cx.tape.vector(Z[1].to_vec(), false));
    let l = model.predict(&mut cx, a, b).unwrap();
    assert_eq!(cx.tape.scalar(l), 0.7);

    let mut model = zero_model(ModelKind::DyrepLite, 0.1);
    set(&mut *model, "w_pred", vec![1.0, 1.0, 1.0, 0.0, 0.0, 0.0]);
    let mut cx = EventCtx::new(sub, &store, model.params(), &base, &pins, false);
    let (a, b) = (cx.tape.vector(Z[0].to_vec(), false), cx.tape.vector(Z[1].to_vec(), false));
    let l = model.predict(&mut cx, a, b).unwrap();
    assert!((cx.tape.scalar(l) - Z[0].iter().sum::<Real>()).abs() < 1e-15);

    // Random weights against a hand-rolled evaluation.
    let model = build_model(&ModelConfig { dim: DIM, seed: 11, ..ModelConfig::default() }).unwrap();
    let w = model.params().by_name("w_pred").unwrap().data.to_vec();
    let bias = model.params().by_name("b_pred").unwrap().data[0];
    let mut cx = EventCtx::new(sub, &store, model.params(), &base, &pins, false);
    let (a, b) = (cx.tape.vector(Z[0].to_vec(), false), cx.tape.vector(Z[2].to_vec(), false));
    let l = model.predict(&mut cx, a, b).unwrap();
    let pair: Vec<Real> = Z[0].iter().chain(&Z[2]).copied().collect();
    let expected: Real = w.iter().zip(&pair).map(|(x, y)| x * y).sum::<Real>() + bias;
    assert!((cx.tape.scalar(l) - expected).abs() < 1e-12);
    let short = cx.tape.vector(vec![1.0], false);
    assert!(model.predict(&mut cx, a, short).is_err());
}

#[test]
fn radius_zero_touches_endpoints_only() {
    let stream = common::random_stream(12, 10, 30);
    let (_, aw) = analyze(&stream, 0, DepMode::Paper, DepSearch::Scan);
    let model = build_model(&ModelConfig { dim: DIM, ..ModelConfig::default() }).unwrap();
    let pins = aw.graph.version_pins();
    let store = EmbeddingStore::init_store(10, DIM, 0);
    let base = store.latest_versions();
    for (i, sub) in aw.snapshots.iter().enumerate() {
        let mut cx = EventCtx::new(sub, &store, model.params(), &base, &pins[i], false);
        let out = process_event(&*model, &mut cx).unwrap();
        let mut ends = sub.event.endpoints();
        ends.sort_unstable();
        assert_eq!(out.touched, ends);
    }
}

/// Two events on disjoint nodes give the same embeddings in either order.
#[test]
fn independent_events_commute() {
    let events = vec![Event::new(0, 0, 1, 1.0, EventKind::AddEdge), Event::new(1, 2, 3, 1.5, EventKind::AddEdge)];
    let s = GraphStream::new(4, events);
    for kind in [ModelKind::DyrepLite, ModelKind::DiffusionLite] {
        let radius = if kind == ModelKind::DiffusionLite { 1 } else { 0 };
        let (_, aw) = analyze(&s, radius, DepMode::Paper, DepSearch::Scan);
        assert_eq!(aw.graph.num_edges(), 0);
        let model = build_model(&ModelConfig { kind, dim: DIM, seed: 1, ..ModelConfig::default() }).unwrap();
        let pins = aw.graph.version_pins();
        let run = |order: [usize; 2]| {
            let store = EmbeddingStore::init_store(4, DIM, 5);
            let base = store.latest_versions();
            for i in order {
                let mut cx = EventCtx::new(&aw.snapshots[i], &store, model.params(), &base, &pins[i], false);
                process_event(&*model, &mut cx).unwrap();
            }
            (0..4).map(|n| store.latest_emb(n).unwrap().to_vec()).collect::<Vec<_>>()
        };
        assert_eq!(run([0, 1]), run([1, 0]));
    }
}
