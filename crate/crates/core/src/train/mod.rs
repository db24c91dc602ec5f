//! Window-by-window training: the sliding/adaptive window loop, per-window
//! multi-epoch training over event schedules, link-prediction evaluation,
//! and a four-stage pipelined driver.
//!
//! The work for one window is split into stages:
//!
//! 1. WD, window determination: pick the window and its held-out slice.
//! 2. DA, dependency analysis: apply structural updates, capture event
//!    subgraphs and build the dependency DAG. The only stage that touches
//!    the topology.
//! 3. ES, event scheduling: version pins and negative samples.
//! 4. PT, parallel training: epochs of forward, backward and optimizer
//!    steps plus evaluation. The only stage that touches embeddings and
//!    parameters.
//!
//! [`train_stream`] runs the stages one after another; [`run_pipeline`]
//! gives each its own thread connected by single-slot queues.

mod exec;
mod metrics;
mod pipeline;
mod sample;
mod stages;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::deps::{DepMode, DepSearch};
use crate::tensor::OptimizerKind;
use crate::Real;

pub use exec::{backward, evaluate_split, forward, train_window, EpochResult, ForwardPass};
pub use metrics::{write_jsonl, MetricsRecord, StageSecs, Summary, METRICS_SCHEMA};
pub use pipeline::{evaluate_stream, run_pipeline, train_stream, TrainOutput};
pub use sample::{compute_auc, sample_negatives, sample_rng, LabeledSample, NegativeDraw};
pub use stages::{analyze_window, prepare_window, PreparedWindow, WindowPlan, WindowPlanner};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum TrainError {
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error("non-finite loss in window {window}, epoch {epoch}")]
    NonFiniteLoss { window: usize, epoch: usize },
    #[error("non-finite score")]
    NonFiniteScore,
    #[error("test slice is empty")]
    EmptyTestSlice,
    #[error("AUC needs both classes (got {positives} positives, {negatives} negatives)")]
    DegenerateAuc { positives: usize, negatives: usize },
    #[error("pipeline stage {0} stalled")]
    PipelineStalled(Stage),
    #[error("pipeline stage {0} panicked")]
    StagePanicked(Stage),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TrainMode {
    /// Disjoint fixed windows (stride == size).
    Batch,
    /// Overlapping fixed windows.
    Slide,
    /// Adaptive windows.
    #[serde(rename = "adaslide")]
    AdaSlide,
}

impl TrainMode {
    pub fn as_str(self) -> &'static str {
        match self {
            TrainMode::Batch => "batch",
            TrainMode::Slide => "slide",
            TrainMode::AdaSlide => "adaslide",
        }
    }
}

impl std::str::FromStr for TrainMode {
    type Err = TrainError;

    fn from_str(s: &str) -> Result<Self, TrainError> {
        match s.to_ascii_lowercase().as_str() {
            "batch" => Ok(TrainMode::Batch),
            "slide" => Ok(TrainMode::Slide),
            "adaslide" | "ada-slide" | "adaptive" => Ok(TrainMode::AdaSlide),
            other => Err(TrainError::InvalidConfig(format!("unknown mode {other:?}"))),
        }
    }
}

impl std::fmt::Display for TrainMode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Pipeline stages.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Stage {
    Wd,
    Da,
    Es,
    Pt,
}

impl std::fmt::Display for Stage {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Stage::Wd => "WD",
            Stage::Da => "DA",
            Stage::Es => "ES",
            Stage::Pt => "PT",
        })
    }
}

impl std::str::FromStr for Stage {
    type Err = TrainError;

    fn from_str(s: &str) -> Result<Self, TrainError> {
        match s.to_ascii_lowercase().as_str() {
            "wd" => Ok(Stage::Wd),
            "da" => Ok(Stage::Da),
            "es" => Ok(Stage::Es),
            "pt" => Ok(Stage::Pt),
            other => Err(TrainError::InvalidConfig(format!("unknown stage {other:?}"))),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub mode: TrainMode,
    /// Fixed window size `s` (Slide, Batch).
    pub window: usize,
    /// Fixed stride `d` (Slide).
    pub stride: usize,
    /// Adaptive window bounds `L` and `H`.
    pub min_window: usize,
    pub max_window: usize,
    /// Adaptive stride as a fraction of the window size.
    pub stride_frac: Real,
    /// Share of an adaptive window held out for evaluation.
    pub test_frac: Real,
    pub epochs: usize,
    pub negatives: usize,
    pub optimizer: OptimizerKind,
    pub workers: usize,
    pub pipeline: bool,
    /// Reduce gradients in a fixed order so any worker count gives
    /// bit-identical results.
    pub deterministic: bool,
    pub seed: u64,
    /// Hop count of captured event subgraphs.
    pub k: usize,
    pub dep_mode: DepMode,
    pub dep_search: DepSearch,
    pub evaluate: bool,
    /// A pipeline stage waiting longer than this on a queue is reported as
    /// stalled.
    pub stage_timeout_secs: u64,
    /// Keeps one stage from overlapping with the others (pipeline
    /// ablation).
    pub serialize_stage: Option<Stage>,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            mode: TrainMode::Slide,
            window: 200,
            stride: 40,
            min_window: 100,
            max_window: 300,
            stride_frac: 0.2,
            test_frac: 0.2,
            epochs: 20,
            negatives: 5,
            optimizer: OptimizerKind::Sgd { lr: 0.05 },
            workers: 1,
            pipeline: false,
            deterministic: true,
            seed: 0,
            k: 1,
            dep_mode: DepMode::Paper,
            dep_search: DepSearch::Scan,
            evaluate: true,
            stage_timeout_secs: 600,
            serialize_stage: None,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<(), TrainError> {
        let bad = |m: &str| Err(TrainError::InvalidConfig(m.to_string()));
        if self.window == 0 {
            return bad("window must be ≥1");
        }
        if self.mode == TrainMode::Slide && self.stride == 0 {
            return bad("stride must be ≥1");
        }
        if self.mode == TrainMode::Slide && self.stride > self.window {
            return bad("stride must not exceed the window size");
        }
        if self.min_window == 0 || self.min_window > self.max_window {
            return bad("need 1 ≤ L ≤ H");
        }
        if !(self.stride_frac > 0.0 && self.stride_frac <= 1.0) {
            return bad("stride-frac must be in (0, 1]");
        }
        if !(self.test_frac > 0.0 && self.test_frac < 1.0) {
            return bad("test-frac must be in (0, 1)");
        }
        if self.epochs == 0 {
            return bad("epochs must be ≥1");
        }
        if self.workers == 0 {
            return bad("workers must be ≥1");
        }
        if self.k == 0 {
            return bad("k must be ≥1 (aggregation reads 1-hop neighbours)");
        }
        let lr = self.optimizer.lr();
        if !(lr > 0.0 && lr.is_finite()) {
            return bad("learning rate must be positive");
        }
        if self.stage_timeout_secs == 0 {
            return bad("stage timeout must be ≥1 second");
        }
        Ok(())
    }
}
