use std::ops::Range;

use super::sample::{sample_negatives, sample_rng};
use super::{TrainConfig, TrainMode};
use crate::deps::{build_dep_graph, AnalyzedWindow, DepConfig};
use crate::graph::DynGraph;
use crate::model::{is_prediction_target, VersionPins};
use crate::stream::Event;
use crate::window::{adaptive_stride, next_adaptive_window, next_fixed_window, Window};
use crate::{NodeId, Seq};

// Salts keeping training and evaluation negatives on separate streams.
const TRAIN_SALT: u64 = 0x7472_6169_6e;
const EVAL_SALT: u64 = 0x6576_616c;

/// One window's work: events to train on and the held-out slice evaluated
/// after each epoch.
#[derive(Clone, Debug, PartialEq)]
pub struct WindowPlan {
    pub index: usize,
    pub window: Window,
    pub train: Range<Seq>,
    pub test: Range<Seq>,
}

/// Window determination. Yields plans until the stream is exhausted.
///
/// - Batch: windows of `s` with stride `s`; test on the next `s` events.
/// - Slide: windows of `s` with stride `d`; test on the next `d` events.
/// - AdaSlide: adaptive windows; the last `test_frac` of each window is
///   held out and the first part trained.
pub struct WindowPlanner<'a> {
    events: &'a [Event],
    cfg: TrainConfig,
    pos: Seq,
    index: usize,
}

impl<'a> WindowPlanner<'a> {
    pub fn new(events: &'a [Event], cfg: &TrainConfig) -> Self {
        WindowPlanner { events, cfg: cfg.clone(), pos: 0, index: 0 }
    }
}

impl Iterator for WindowPlanner<'_> {
    type Item = WindowPlan;

    fn next(&mut self) -> Option<WindowPlan> {
        let m = self.events.len();
        if self.pos >= m {
            return None;
        }
        let c = &self.cfg;
        let (window, train, test, next) = match c.mode {
            TrainMode::Batch | TrainMode::Slide => {
                let stride = if c.mode == TrainMode::Batch { c.window } else { c.stride };
                let (w, next) = next_fixed_window(m, self.pos, c.window, stride);
                let test = w.end..(w.end + stride).min(m);
                (w, w.range(), test, next)
            }
            TrainMode::AdaSlide => {
                let (w, _) = next_adaptive_window(self.events, self.pos, c.min_window, c.max_window, c.stride_frac);
                let n_test = if w.len() >= 2 {
                    ((c.test_frac * w.len() as f64).round() as usize).clamp(1, w.len() - 1)
                } else {
                    0
                };
                let split = w.end - n_test;
                let next = self.pos + adaptive_stride(w.len(), c.stride_frac);
                (w, w.start..split, split..w.end, next)
            }
        };
        let plan = WindowPlan { index: self.index, window, train, test };
        self.index += 1;
        self.pos = next;
        Some(plan)
    }
}

/// Dependency analysis for the training events, then for the held-out
/// slice (which sees the training events' structure).
pub fn analyze_window(
    plan: &WindowPlan,
    events: &[Event],
    g: &mut DynGraph,
    dep: &DepConfig,
) -> crate::Result<(AnalyzedWindow, AnalyzedWindow)> {
    let train = build_dep_graph(&events[plan.train.clone()], g, dep)?;
    let test = build_dep_graph(&events[plan.test.clone()], g, dep)?;
    Ok((train, test))
}

/// A window ready for training.
#[derive(Clone, Debug)]
pub struct PreparedWindow {
    pub plan: WindowPlan,
    pub train: AnalyzedWindow,
    pub test: AnalyzedWindow,
    pub train_pins: Vec<VersionPins>,
    pub test_pins: Vec<VersionPins>,
    /// `[epoch][event]` negative partners for training.
    pub train_negatives: Vec<Vec<Vec<NodeId>>>,
    /// `[event]` negative partners for evaluation, shared by all epochs.
    pub test_negatives: Vec<Vec<NodeId>>,
    /// Events whose negatives came from the degraded sampler.
    pub degraded_events: usize,
}

fn draw_all(aw: &AnalyzedWindow, count: usize, seed: u64, salt: u64, epoch: usize, degraded: &mut usize) -> Vec<Vec<NodeId>> {
    aw.snapshots
        .iter()
        .map(|sub| {
            if !is_prediction_target(&sub.event) || count == 0 {
                return Vec::new();
            }
            let mut rng = sample_rng(seed, salt, epoch, sub.event.seq);
            let d = sample_negatives(sub, count, &mut rng);
            if d.degraded {
                *degraded += 1;
            }
            d.partners
        })
        .collect()
}

/// Event scheduling: version pins from the dependency DAG and negative
/// samples for every epoch.
pub fn prepare_window(
    plan: WindowPlan,
    train: AnalyzedWindow,
    test: AnalyzedWindow,
    cfg: &TrainConfig,
) -> PreparedWindow {
    let train_pins = train.graph.version_pins();
    let test_pins = test.graph.version_pins();
    let mut degraded = 0;
    let train_negatives = (0..cfg.epochs)
        .map(|ep| draw_all(&train, cfg.negatives, cfg.seed, TRAIN_SALT, ep, &mut degraded))
        .collect();
    let test_negatives = draw_all(&test, cfg.negatives, cfg.seed, EVAL_SALT, 0, &mut degraded);
    if degraded > 0 {
        log::debug!("window {}: {degraded} negative draws fell back to u/v-only exclusion", plan.index);
    }
    PreparedWindow {
        plan,
        train,
        test,
        train_pins,
        test_pins,
        train_negatives,
        test_negatives,
        degraded_events: degraded,
    }
}
