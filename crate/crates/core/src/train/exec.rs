//! Forward and backward passes over a scheduled window.
//!
//! Each event records its own tape. Events are linked through the
//! `(node, version)` keys of the embeddings they read and write: during the
//! reverse sweep, a reader deposits the gradient of every in-window version
//! it read, and the writer of that version picks the deposits up as seeds
//! for its own tape. The reverse schedule guarantees every reader of a
//! version finishes before its writer starts.

use std::time::Instant;

use dashmap::DashMap;
use parking_lot::Mutex;

use super::sample::compute_auc;
use super::stages::PreparedWindow;
use super::{TrainConfig, TrainError};
use crate::deps::{run_schedule, run_schedule_reverse, AnalyzedWindow};
use crate::embed::EmbeddingStore;
use crate::model::{process_event, DynModel, EmbAccess, EventCtx, VersionPins};
use crate::tensor::{optimizer_step, OptimizerState, ParamGrads, Tape, Var};
use crate::{NodeId, Real};

struct EventRecord {
    tape: Tape,
    reads: Vec<EmbAccess>,
    writes: Vec<EmbAccess>,
    params: Vec<(usize, Var)>,
    loss: Option<Var>,
    loss_sum: Real,
    samples: usize,
    scores: Vec<(Real, bool)>,
}

/// Result of a forward pass over one window.
pub struct ForwardPass {
    records: Vec<Mutex<Option<EventRecord>>>,
    base: Vec<u32>,
    /// Total number of scored samples.
    pub samples: usize,
    /// Sum of per-sample BCE, accumulated in window order.
    pub loss_sum: Real,
    /// `(logit, is_positive)` in window order.
    pub scores: Vec<(Real, bool)>,
}

impl ForwardPass {
    pub fn mean_loss(&self) -> Real {
        if self.samples == 0 {
            0.0
        } else {
            self.loss_sum / self.samples as Real
        }
    }
}

/// Runs every event of `aw` through the model under the dependency
/// schedule, writing new embedding versions to `store`.
pub fn forward(
    model: &dyn DynModel,
    store: &EmbeddingStore,
    aw: &AnalyzedWindow,
    pins: &[VersionPins],
    negatives: &[Vec<NodeId>],
    workers: usize,
    track_grads: bool,
) -> crate::Result<ForwardPass> {
    let base = store.latest_versions();
    let records: Vec<Mutex<Option<EventRecord>>> = (0..aw.snapshots.len()).map(|_| Mutex::new(None)).collect();
    run_schedule(&aw.graph, workers, |i| {
        let sub = &aw.snapshots[i];
        let mut cx = EventCtx::new(sub, store, model.params(), &base, &pins[i], track_grads);
        let out = process_event(model, &mut cx)?;
        let mut losses = Vec::new();
        let mut scores = Vec::new();
        if let Some(pos) = out.positive {
            scores.push((cx.tape.scalar(pos), true));
            losses.push(cx.tape.bce_with_logits(pos, 1.0)?);
            for &w in &negatives[i] {
                let z_w = cx.emb_at_base(w)?;
                let logit = model.predict(&mut cx, out.z_u, z_w)?;
                scores.push((cx.tape.scalar(logit), false));
                losses.push(cx.tape.bce_with_logits(logit, 0.0)?);
            }
        }
        let loss = if losses.is_empty() { None } else { Some(cx.tape.sum(&losses)?) };
        let loss_sum = loss.map_or(0.0, |l| cx.tape.scalar(l));
        let samples = losses.len();
        let (tape, reads, writes, params) = cx.finish();
        let tape = if track_grads { tape } else { Tape::new() };
        *records[i].lock() = Some(EventRecord { tape, reads, writes, params, loss, loss_sum, samples, scores });
        Ok(())
    })?;

    let mut pass = ForwardPass { records, base, samples: 0, loss_sum: 0.0, scores: Vec::new() };
    for slot in &pass.records {
        let guard = slot.lock();
        let r = guard.as_ref().expect("every event ran");
        pass.samples += r.samples;
        pass.loss_sum += r.loss_sum;
        pass.scores.extend_from_slice(&r.scores);
    }
    Ok(pass)
}

/// Reverse sweep of the mean loss of `pass` into parameter gradients.
pub fn backward(
    model: &dyn DynModel,
    aw: &AnalyzedWindow,
    pass: ForwardPass,
    workers: usize,
    deterministic: bool,
) -> crate::Result<ParamGrads> {
    let params = model.params();
    let total = Mutex::new(params.zero_grads());
    if pass.samples == 0 {
        return Ok(total.into_inner());
    }
    let inv_n = 1.0 / pass.samples as Real;
    let deposits: DashMap<(NodeId, u32), Vec<(usize, Vec<Real>)>> = DashMap::new();
    let per_event: Vec<Mutex<Vec<(usize, Vec<Real>)>>> = (0..aw.snapshots.len()).map(|_| Mutex::new(Vec::new())).collect();
    let base = &pass.base;

    run_schedule_reverse(&aw.graph, workers, |i| {
        let Some(rec) = pass.records[i].lock().take() else {
            return Ok(());
        };
        let mut seeds: Vec<(Var, Vec<Real>)> = Vec::new();
        if let Some(l) = rec.loss {
            seeds.push((l, vec![inv_n]));
        }
        for w in &rec.writes {
            if let Some((_, mut contribs)) = deposits.remove(&(w.node, w.version)) {
                if deterministic {
                    contribs.sort_by_key(|c| c.0);
                }
                let mut it = contribs.into_iter();
                let (_, mut g) = it.next().expect("deposit lists are never empty");
                for (_, c) in it {
                    g.iter_mut().zip(&c).for_each(|(a, b)| *a += b);
                }
                seeds.push((w.var, g));
            }
        }
        if seeds.is_empty() {
            return Ok(());
        }
        let mut grads = rec.tape.backward_from(&seeds)?;
        for r in &rec.reads {
            if r.version <= base[r.node as usize] {
                continue;
            }
            if let Some(g) = grads.take(r.var) {
                deposits.entry((r.node, r.version)).or_default().push((i, g));
            }
        }
        let mut mine = Vec::with_capacity(rec.params.len());
        for &(idx, var) in &rec.params {
            if let Some(g) = grads.take(var) {
                mine.push((idx, g));
            }
        }
        if deterministic {
            *per_event[i].lock() = mine;
        } else {
            let mut t = total.lock();
            for (idx, g) in mine {
                t.add_to(idx, &g);
            }
        }
        Ok(())
    })?;

    let mut total = total.into_inner();
    if deterministic {
        for slot in per_event {
            for (idx, g) in slot.into_inner() {
                total.add_to(idx, &g);
            }
        }
    }
    Ok(total)
}

/// One epoch's outcome.
#[derive(Clone, Debug, PartialEq)]
pub struct EpochResult {
    pub epoch: usize,
    pub loss: Real,
    pub samples: usize,
    pub auc: Option<Real>,
    pub test_samples: usize,
    pub secs: f64,
}

/// Forward-only pass over a held-out slice; embeddings are rolled back
/// afterwards. Returns the AUC and the number of scored samples.
pub fn evaluate_split(
    model: &dyn DynModel,
    store: &mut EmbeddingStore,
    aw: &AnalyzedWindow,
    pins: &[VersionPins],
    negatives: &[Vec<NodeId>],
    workers: usize,
) -> crate::Result<(Real, usize)> {
    if aw.snapshots.is_empty() {
        return Err(TrainError::EmptyTestSlice.into());
    }
    let cp = store.checkpoint();
    let pass = forward(model, store, aw, pins, negatives, workers, false);
    store.restore(&cp)?;
    let pass = pass?;
    let auc = compute_auc(&pass.scores)?;
    Ok((auc, pass.scores.len()))
}

/// Trains on one prepared window: every epoch restores the window-start
/// embeddings, runs forward and backward under the dependency schedule,
/// steps the optimizer and evaluates on the held-out slice. The last
/// epoch's embeddings are committed.
pub fn train_window(
    pw: &PreparedWindow,
    store: &mut EmbeddingStore,
    model: &mut dyn DynModel,
    opt: &mut OptimizerState,
    cfg: &TrainConfig,
) -> crate::Result<Vec<EpochResult>> {
    let start = store.checkpoint();
    let mut out = Vec::with_capacity(cfg.epochs);
    for epoch in 0..cfg.epochs {
        let t0 = Instant::now();
        store.restore(&start)?;
        let pass = forward(
            &*model,
            store,
            &pw.train,
            &pw.train_pins,
            &pw.train_negatives[epoch],
            cfg.workers,
            true,
        )?;
        let loss = pass.mean_loss();
        if !loss.is_finite() {
            return Err(TrainError::NonFiniteLoss { window: pw.plan.index, epoch }.into());
        }
        let samples = pass.samples;
        let mut grads = backward(&*model, &pw.train, pass, cfg.workers, cfg.deterministic)?;
        if samples > 0 {
            optimizer_step(model.params_mut(), &mut grads, opt)?;
        }

        let (mut auc, mut test_samples) = (None, 0);
        if cfg.evaluate && !pw.test.snapshots.is_empty() {
            match evaluate_split(&*model, store, &pw.test, &pw.test_pins, &pw.test_negatives, cfg.workers) {
                Ok((a, n)) => {
                    auc = Some(a);
                    test_samples = n;
                }
                Err(crate::Error::Train(TrainError::DegenerateAuc { .. })) => {}
                Err(e) => return Err(e),
            }
        }
        out.push(EpochResult { epoch, loss, samples, auc, test_samples, secs: t0.elapsed().as_secs_f64() });
    }
    store.commit();
    Ok(out)
}
