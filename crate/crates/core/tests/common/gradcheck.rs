//! Central finite-difference checks shared by the gradient tests and the
//! acceptance suite.

use dgnn_core::deps::{DepMode, DepSearch};
use dgnn_core::model::{build_model, is_prediction_target, ModelConfig, ModelKind, VersionPins};
use dgnn_core::tensor::{Shape, Tape, Var};
use dgnn_core::train::{sample_negatives, sample_rng};
use dgnn_core::{NodeId, Real};
use rand::Rng;

use super::{analyze, central_diff, event_loss, gaussian_rows, random_stream, rel_err, rng, two_version_store};

const H: Real = 1e-6;

type Build = fn(&mut Tape, &[Var]) -> Var;

fn scalar_of(t: &mut Tape, out: Var, weights: &[Real]) -> Var {
    if t.shape(out) == Shape::SCALAR {
        return out;
    }
    let w = t.vector(weights[..t.shape(out).len()].to_vec(), false);
    t.dot(out, w).unwrap()
}

fn eval(build: Build, inputs: &[(Vec<Real>, Shape)], weights: &[Real], grad: bool) -> (Real, Vec<Vec<Real>>) {
    let mut t = Tape::new();
    let vars: Vec<Var> = inputs.iter().map(|(d, s)| t.leaf(d.clone(), *s, grad).unwrap()).collect();
    let out = build(&mut t, &vars);
    let root = scalar_of(&mut t, out, weights);
    let value = t.scalar(root);
    if !grad {
        return (value, Vec::new());
    }
    let g = t.backward(root).unwrap();
    let grads = vars
        .iter()
        .zip(inputs)
        .map(|(&v, (d, _))| g.get(v).map_or(vec![0.0; d.len()], <[Real]>::to_vec))
        .collect();
    (value, grads)
}

fn check(build: Build, inputs: Vec<(Vec<Real>, Shape)>, weights: &[Real]) -> Real {
    let (_, analytic) = eval(build, &inputs, weights, true);
    let mut worst: Real = 0.0;
    for (k, (data, _)) in inputs.iter().enumerate() {
        let fd = central_diff(data, H, |x| {
            let mut moved = inputs.clone();
            moved[k].0 = x.to_vec();
            eval(build, &moved, weights, false).0
        });
        worst = worst.max(rel_err(&analytic[k], &fd));
    }
    worst
}

/// Worst relative error of every tape primitive (plus a few compositions)
/// on random inputs drawn from `seed`.
pub fn primitive_errors(seed: u64) -> Vec<(&'static str, Real)> {
    let mut r = rng(seed);
    let mut v = |n: usize| -> (Vec<Real>, Shape) {
        // Keep clear of the relu kink.
        let d = (0..n)
            .map(|_| {
                let x: Real = r.random_range(-2.0..2.0);
                if x.abs() < 0.05 { x + 0.1 } else { x }
            })
            .collect();
        (d, Shape::vector(n))
    };
    let m = |r: &mut rand_chacha::ChaCha8Rng, rows: usize, cols: usize| -> (Vec<Real>, Shape) {
        ((0..rows * cols).map(|_| r.random_range(-1.0..1.0)).collect(), Shape::matrix(rows, cols))
    };
    let s = |x: Real| (vec![x], Shape::SCALAR);
    let mut r2 = rng(seed ^ 0xABCD);
    let weights: Vec<Real> = (0..16).map(|_| r2.random_range(-1.0..1.0)).collect();
    let logit: Real = r2.random_range(-4.0..4.0);

    let cases: Vec<(&'static str, Build, Vec<(Vec<Real>, Shape)>)> = vec![
        ("matvec", |t, x| t.matvec(x[0], x[1]).unwrap(), vec![m(&mut r2, 3, 4), v(4)]),
        ("add", |t, x| t.add(x[0], x[1]).unwrap(), vec![v(5), v(5)]),
        ("sub", |t, x| t.sub(x[0], x[1]).unwrap(), vec![v(5), v(5)]),
        ("scale", |t, x| t.scale(x[0], -1.7), vec![v(4)]),
        ("concat", |t, x| t.concat(&[x[0], x[1], x[2]]).unwrap(), vec![v(2), v(3), v(4)]),
        ("dot", |t, x| t.dot(x[0], x[1]).unwrap(), vec![v(6), v(6)]),
        ("mean_vectors", |t, x| t.mean_vectors(&[x[0], x[1], x[2]]).unwrap(), vec![v(4), v(4), v(4)]),
        ("sum", |t, x| t.sum(&[x[0], x[1], x[2]]).unwrap(), vec![v(4), v(4), v(4)]),
        ("tanh", |t, x| t.tanh(x[0]), vec![v(6)]),
        ("sigmoid", |t, x| t.sigmoid(x[0]), vec![v(6)]),
        ("relu", |t, x| t.relu(x[0]), vec![v(6)]),
        ("bce_pos", |t, x| t.bce_with_logits(x[0], 1.0).unwrap(), vec![s(logit)]),
        ("bce_neg", |t, x| t.bce_with_logits(x[0], 0.0).unwrap(), vec![s(-logit)]),
        ("reuse", |t, x| {
            let a = t.add(x[0], x[0]).unwrap();
            let b = t.tanh(x[0]);
            t.dot(a, b).unwrap()
        }, vec![v(5)]),
        ("composite", |t, x| {
            let c = t.concat(&[x[1], x[2]]).unwrap();
            let h = t.matvec(x[0], c).unwrap();
            let h = t.tanh(h);
            let g = t.sigmoid(x[1]);
            let o = t.sub(h, g).unwrap();
            let d = t.dot(o, o).unwrap();
            t.bce_with_logits(d, 1.0).unwrap()
        }, vec![m(&mut r2, 3, 6), v(3), v(3)]),
    ];
    cases.into_iter().map(|(name, b, inputs)| (name, check(b, inputs, &weights))).collect()
}

/// Worst relative error between the analytic and finite-difference gradient
/// of one event's full loss (positive plus three negatives), over every
/// parameter tensor and every differentiable embedding read.
pub fn event_gradient_error(kind: ModelKind, seed: u64) -> Real {
    let (nodes, dim) = (10, 4);
    let mut stream_seed = seed;
    let (aw, target) = loop {
        let s = random_stream(stream_seed, nodes, 14);
        let radius = if kind == ModelKind::DiffusionLite { 1 } else { 0 };
        let (_, aw) = analyze(&s, radius, DepMode::Paper, DepSearch::Scan);
        let pick = (0..aw.snapshots.len())
            .rev()
            .find(|&i| is_prediction_target(&aw.snapshots[i].event) && aw.snapshots[i].affected.len() > 2);
        if let Some(i) = pick {
            break (aw, i);
        }
        stream_seed = stream_seed.wrapping_add(1_000_003);
    };
    let sub = &aw.snapshots[target];
    let mut r = rng(seed ^ 0x5EED);
    let z0 = gaussian_rows(&mut r, nodes, dim, 0.5);
    let z1 = gaussian_rows(&mut r, nodes, dim, 0.5);
    let negatives = sample_negatives(sub, 3, &mut sample_rng(seed, 1, 0, sub.event.seq)).partners;
    let base = vec![0u32; nodes];
    let pins = VersionPins::from_pairs((0..nodes as NodeId).map(|n| (n, 1)).collect());

    let cfg = ModelConfig { kind, dim, seed, decay: 0.3, aggregate_both: seed % 2 == 0, ..ModelConfig::default() };
    let mut model = build_model(&cfg).unwrap();
    // Non-zero biases so their gradients are exercised at a generic point.
    for i in 0..model.params().len() {
        let p = model.params().get(i);
        let data: Vec<Real> = p.data.iter().map(|&x| x + r.random_range(-0.1..0.1)).collect();
        model.params_mut().set_data(i, data).unwrap();
    }

    let loss_at = |model: &dyn dgnn_core::model::DynModel, z1: &[Vec<Real>]| {
        let store = two_version_store(&z0, z1);
        event_loss(model, &store, sub, &negatives, &base, &pins)
    };
    let analytic = loss_at(&*model, &z1);
    assert!(analytic.samples >= 1);

    let mut worst: Real = 0.0;
    for i in 0..model.params().len() {
        let orig = model.params().get(i).data.to_vec();
        let fd = central_diff(&orig, H, |x| {
            model.params_mut().set_data(i, x.to_vec()).unwrap();
            loss_at(&*model, &z1).loss
        });
        model.params_mut().set_data(i, orig).unwrap();
        worst = worst.max(rel_err(&analytic.param_grads[i], &fd));
    }
    assert!(!analytic.emb_grads.is_empty(), "embedding reads should be differentiable");
    for (n, g) in &analytic.emb_grads {
        let n = *n as usize;
        let fd = central_diff(&z1[n], H, |x| {
            let mut moved = z1.clone();
            moved[n] = x.to_vec();
            loss_at(&*model, &moved).loss
        });
        worst = worst.max(rel_err(g, &fd));
    }
    worst
}
