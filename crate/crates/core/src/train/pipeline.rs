use std::sync::mpsc::{sync_channel, Receiver, RecvTimeoutError, SyncSender};
use std::time::{Duration, Instant};

use parking_lot::RwLock;

use super::exec::{evaluate_split, forward, train_window, EpochResult};
use super::metrics::{mean_best_auc, overlap_fraction, MetricsRecord, StageSecs, Summary, METRICS_SCHEMA};
use super::stages::{analyze_window, prepare_window, PreparedWindow, WindowPlan, WindowPlanner};
use super::{Stage, TrainConfig, TrainError};
use crate::deps::{AnalyzedWindow, DepConfig};
use crate::embed::EmbeddingStore;
use crate::graph::DynGraph;
use crate::model::DynModel;
use crate::stream::{validate_stream, GraphStream, StreamError};
use crate::tensor::OptimizerState;

/// Everything a training run produces.
#[derive(Debug)]
pub struct TrainOutput {
    pub records: Vec<MetricsRecord>,
    pub summary: Summary,
    /// Embeddings after the last window's commit.
    pub store: EmbeddingStore,
    /// Topology after every analysed event.
    pub graph: DynGraph,
}

/// Per-window stage times plus their wall-clock intervals relative to the
/// run start.
#[derive(Clone, Copy, Debug, Default)]
struct Timing {
    secs: StageSecs,
    da_span: (f64, f64),
}

struct Setup {
    graph: DynGraph,
    store: EmbeddingStore,
    opt: OptimizerState,
    dep: DepConfig,
}

fn setup(stream: &GraphStream, model: &dyn DynModel, cfg: &TrainConfig) -> crate::Result<Setup> {
    cfg.validate()?;
    let report = validate_stream(stream);
    if !report.is_valid() {
        return Err(StreamError::Invalid(report).into());
    }
    let graph = DynGraph::from_stream(stream)?;
    let store = EmbeddingStore::init_store(stream.total_nodes(), model.dim(), cfg.seed ^ 0x5EED_E3B0);
    let opt = OptimizerState::new(cfg.optimizer, model.params());
    let dep = DepConfig { k: cfg.k, radius: model.update_radius(), mode: cfg.dep_mode, search: cfg.dep_search };
    Ok(Setup { graph, store, opt, dep })
}

fn window_records(pw: &PreparedWindow, epochs: &[EpochResult], secs: StageSecs) -> Vec<MetricsRecord> {
    let chains = pw.train.graph.chains().len();
    let parallelism = pw.train.graph.parallelism();
    epochs
        .iter()
        .map(|r| MetricsRecord {
            schema: METRICS_SCHEMA,
            record: "epoch".into(),
            window: pw.plan.index,
            window_start: pw.plan.window.start,
            window_size: pw.plan.window.len(),
            train_events: pw.plan.train.len(),
            test_events: pw.plan.test.len(),
            epoch: r.epoch,
            loss: r.loss,
            samples: r.samples,
            auc: r.auc,
            test_samples: r.test_samples,
            chains,
            parallelism,
            stage_secs: secs,
            epoch_secs: r.secs,
        })
        .collect()
}

fn summarize(
    records: &[MetricsRecord],
    cfg: &TrainConfig,
    windows: usize,
    wall: f64,
    totals: StageSecs,
    overlap: f64,
    pipeline: bool,
) -> Summary {
    Summary {
        schema: METRICS_SCHEMA,
        record: "summary".into(),
        mode: cfg.mode.as_str().into(),
        windows,
        epochs: cfg.epochs,
        workers: cfg.workers,
        pipeline,
        mean_best_auc: mean_best_auc(records),
        final_loss: records.last().map(|r| r.loss),
        wall_secs: wall,
        stage_secs: totals,
        da_overlap_fraction: overlap,
    }
}

/// Trains over the whole stream, running the four stages of each window
/// back to back on the calling thread. Topology and embeddings carry over
/// from window to window.
pub fn train_stream(stream: &GraphStream, model: &mut dyn DynModel, cfg: &TrainConfig) -> crate::Result<TrainOutput> {
    let Setup { mut graph, mut store, mut opt, dep } = setup(stream, model, cfg)?;
    let t0 = Instant::now();
    let mut records = Vec::new();
    let mut totals = StageSecs::default();
    let mut windows = 0;
    let mut planner = WindowPlanner::new(&stream.events, cfg);
    loop {
        let mut secs = StageSecs::default();
        let t = Instant::now();
        let Some(plan) = planner.next() else { break };
        secs.wd = t.elapsed().as_secs_f64();

        let t = Instant::now();
        let (train, test) = analyze_window(&plan, &stream.events, &mut graph, &dep)?;
        secs.da = t.elapsed().as_secs_f64();

        let t = Instant::now();
        let pw = prepare_window(plan, train, test, cfg);
        secs.es = t.elapsed().as_secs_f64();

        let t = Instant::now();
        let epochs = train_window(&pw, &mut store, model, &mut opt, cfg)?;
        secs.pt = t.elapsed().as_secs_f64();

        records.extend(window_records(&pw, &epochs, secs));
        totals.add(&secs);
        windows += 1;
    }
    let summary = summarize(&records, cfg, windows, t0.elapsed().as_secs_f64(), totals, 0.0, false);
    Ok(TrainOutput { records, summary, store, graph })
}

/// Replays the stream with frozen parameters: each window's training
/// events only advance the embeddings, then the held-out slice is scored.
/// Records carry the forward loss and the AUC, one per window.
pub fn evaluate_stream(stream: &GraphStream, model: &dyn DynModel, cfg: &TrainConfig) -> crate::Result<TrainOutput> {
    let cfg = TrainConfig { epochs: 1, ..cfg.clone() };
    let Setup { mut graph, mut store, dep, .. } = setup(stream, model, &cfg)?;
    let t0 = Instant::now();
    let mut records = Vec::new();
    let mut totals = StageSecs::default();
    let mut windows = 0;
    for plan in WindowPlanner::new(&stream.events, &cfg) {
        let mut secs = StageSecs::default();
        let t = Instant::now();
        let (train, test) = analyze_window(&plan, &stream.events, &mut graph, &dep)?;
        secs.da = t.elapsed().as_secs_f64();
        let t = Instant::now();
        let pw = prepare_window(plan, train, test, &cfg);
        secs.es = t.elapsed().as_secs_f64();

        let t = Instant::now();
        let pass = forward(model, &store, &pw.train, &pw.train_pins, &pw.train_negatives[0], cfg.workers, false)?;
        store.commit();
        let (mut auc, mut test_samples) = (None, 0);
        if !pw.test.snapshots.is_empty() {
            match evaluate_split(model, &mut store, &pw.test, &pw.test_pins, &pw.test_negatives, cfg.workers) {
                Ok((a, n)) => {
                    auc = Some(a);
                    test_samples = n;
                }
                Err(crate::Error::Train(TrainError::DegenerateAuc { .. })) => {}
                Err(e) => return Err(e),
            }
        }
        secs.pt = t.elapsed().as_secs_f64();
        let result = EpochResult { epoch: 0, loss: pass.mean_loss(), samples: pass.samples, auc, test_samples, secs: secs.pt };
        records.extend(window_records(&pw, &[result], secs));
        totals.add(&secs);
        windows += 1;
    }
    let summary = summarize(&records, &cfg, windows, t0.elapsed().as_secs_f64(), totals, 0.0, false);
    Ok(TrainOutput { records, summary, store, graph })
}

type Msg<T> = crate::Result<T>;

fn recv<T>(rx: &Receiver<Msg<T>>, timeout: Duration, upstream: Stage) -> crate::Result<Option<T>> {
    match rx.recv_timeout(timeout) {
        Ok(Ok(x)) => Ok(Some(x)),
        Ok(Err(e)) => Err(e),
        Err(RecvTimeoutError::Disconnected) => Ok(None),
        Err(RecvTimeoutError::Timeout) => Err(TrainError::PipelineStalled(upstream).into()),
    }
}

/// Keeps the serialised stage (if any) from running alongside the others.
struct Gate {
    lock: RwLock<()>,
    exclusive: Option<Stage>,
}

impl Gate {
    fn run<T>(&self, stage: Stage, f: impl FnOnce() -> T) -> T {
        if self.exclusive == Some(stage) {
            let _g = self.lock.write();
            f()
        } else {
            let _g = self.lock.read();
            f()
        }
    }
}

fn span(t0: Instant, start: Instant) -> (f64, f64) {
    (start.duration_since(t0).as_secs_f64(), t0.elapsed().as_secs_f64())
}

/// Same computation as [`train_stream`], with WD, DA and ES each on their
/// own thread and PT on the calling thread, connected by single-slot
/// queues. While window `k` trains, window `k + 1` is already being
/// analysed and scheduled.
///
/// DA only mutates topology and PT only reads captured snapshots, so the
/// two never share mutable state and results match the sequential driver.
pub fn run_pipeline(stream: &GraphStream, model: &mut dyn DynModel, cfg: &TrainConfig) -> crate::Result<TrainOutput> {
    let Setup { graph, mut store, mut opt, dep } = setup(stream, model, cfg)?;
    let timeout = Duration::from_secs(cfg.stage_timeout_secs);
    let gate = Gate { lock: RwLock::new(()), exclusive: cfg.serialize_stage };
    let t0 = Instant::now();
    let events = &stream.events;

    let (wd_tx, wd_rx) = sync_channel::<Msg<(WindowPlan, f64)>>(1);
    let (da_tx, da_rx) = sync_channel::<Msg<(WindowPlan, AnalyzedWindow, AnalyzedWindow, Timing)>>(1);
    let (es_tx, es_rx) = sync_channel::<Msg<(PreparedWindow, Timing)>>(1);

    let mut records = Vec::new();
    let mut totals = StageSecs::default();
    let mut windows = 0;
    let mut da_spans = Vec::new();
    let mut pt_spans = Vec::new();

    let (graph, result) = std::thread::scope(|s| {
        let gate = &gate;
        let wd = s.spawn(move || {
            let tx: SyncSender<_> = wd_tx;
            let mut planner = WindowPlanner::new(events, cfg);
            loop {
                let t = Instant::now();
                let Some(plan) = gate.run(Stage::Wd, || planner.next()) else { break };
                if tx.send(Ok((plan, t.elapsed().as_secs_f64()))).is_err() {
                    break;
                }
            }
        });

        let da = s.spawn(move || {
            let mut graph = graph;
            loop {
                let (plan, wd_secs) = match recv(&wd_rx, timeout, Stage::Wd) {
                    Ok(Some(x)) => x,
                    Ok(None) => break,
                    Err(e) => {
                        let _ = da_tx.send(Err(e));
                        break;
                    }
                };
                let start = Instant::now();
                let out = gate.run(Stage::Da, || analyze_window(&plan, events, &mut graph, &dep));
                let mut timing = Timing::default();
                timing.secs.wd = wd_secs;
                timing.secs.da = start.elapsed().as_secs_f64();
                timing.da_span = span(t0, start);
                let msg = out.map(|(train, test)| (plan, train, test, timing));
                let failed = msg.is_err();
                if da_tx.send(msg).is_err() || failed {
                    break;
                }
            }
            graph
        });

        let es = s.spawn(move || loop {
            let (plan, train, test, mut timing) = match recv(&da_rx, timeout, Stage::Da) {
                Ok(Some(x)) => x,
                Ok(None) => break,
                Err(e) => {
                    let _ = es_tx.send(Err(e));
                    break;
                }
            };
            let start = Instant::now();
            let pw = gate.run(Stage::Es, || prepare_window(plan, train, test, cfg));
            timing.secs.es = start.elapsed().as_secs_f64();
            if es_tx.send(Ok((pw, timing))).is_err() {
                break;
            }
        });

        let result = (|| -> crate::Result<()> {
            while let Some((pw, mut timing)) = recv(&es_rx, timeout, Stage::Es)? {
                let start = Instant::now();
                let epochs = gate.run(Stage::Pt, || train_window(&pw, &mut store, model, &mut opt, cfg))?;
                timing.secs.pt = start.elapsed().as_secs_f64();
                pt_spans.push(span(t0, start));
                da_spans.push(timing.da_span);
                records.extend(window_records(&pw, &epochs, timing.secs));
                totals.add(&timing.secs);
                windows += 1;
            }
            Ok(())
        })();
        // Unblock upstream senders if training stopped early.
        drop(es_rx);

        let mut panicked = None;
        if wd.join().is_err() {
            panicked = Some(Stage::Wd);
        }
        let graph = da.join();
        if graph.is_err() {
            panicked = Some(Stage::Da);
        }
        if es.join().is_err() {
            panicked = Some(Stage::Es);
        }
        let result = match (result, panicked) {
            (Err(e), _) => Err(e),
            (Ok(()), Some(stage)) => Err(TrainError::StagePanicked(stage).into()),
            (Ok(()), None) => Ok(()),
        };
        (graph.ok(), result)
    });
    result?;
    let graph = graph.expect("DA stage returned its graph");
    let overlap = overlap_fraction(&da_spans, &pt_spans);
    let summary = summarize(&records, cfg, windows, t0.elapsed().as_secs_f64(), totals, overlap, true);
    Ok(TrainOutput { records, summary, store, graph })
}
