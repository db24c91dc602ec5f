use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::Real;

pub const METRICS_SCHEMA: u32 = 1;

/// Seconds spent in each stage.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct StageSecs {
    pub wd: f64,
    pub da: f64,
    pub es: f64,
    pub pt: f64,
}

impl StageSecs {
    pub fn add(&mut self, o: &StageSecs) {
        self.wd += o.wd;
        self.da += o.da;
        self.es += o.es;
        self.pt += o.pt;
    }

    pub fn total(&self) -> f64 {
        self.wd + self.da + self.es + self.pt
    }
}

/// One line per (window, epoch).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MetricsRecord {
    pub schema: u32,
    pub record: String,
    pub window: usize,
    pub window_start: usize,
    pub window_size: usize,
    pub train_events: usize,
    pub test_events: usize,
    pub epoch: usize,
    pub loss: Real,
    pub samples: usize,
    pub auc: Option<Real>,
    pub test_samples: usize,
    pub chains: usize,
    pub parallelism: f64,
    /// Stage times of the whole window (repeated on every epoch line).
    pub stage_secs: StageSecs,
    pub epoch_secs: f64,
}

/// Final line of a run.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub schema: u32,
    pub record: String,
    pub mode: String,
    pub windows: usize,
    pub epochs: usize,
    pub workers: usize,
    pub pipeline: bool,
    /// Mean over evaluated windows of the best epoch AUC.
    pub mean_best_auc: Option<Real>,
    pub final_loss: Option<Real>,
    pub wall_secs: f64,
    pub stage_secs: StageSecs,
    /// Share of dependency-analysis time that ran while training was busy.
    pub da_overlap_fraction: f64,
}

pub fn write_jsonl<W: Write>(records: &[MetricsRecord], summary: &Summary, mut out: W) -> std::io::Result<()> {
    for r in records {
        serde_json::to_writer(&mut out, r)?;
        out.write_all(b"\n")?;
    }
    serde_json::to_writer(&mut out, summary)?;
    out.write_all(b"\n")?;
    Ok(())
}

/// Mean over windows of the highest AUC any epoch reached.
pub(crate) fn mean_best_auc(records: &[MetricsRecord]) -> Option<Real> {
    let mut best: Vec<Option<Real>> = Vec::new();
    for r in records {
        if best.len() <= r.window {
            best.resize(r.window + 1, None);
        }
        if let Some(a) = r.auc {
            let slot = &mut best[r.window];
            *slot = Some(slot.map_or(a, |b: Real| b.max(a)));
        }
    }
    let vals: Vec<Real> = best.into_iter().flatten().collect();
    if vals.is_empty() {
        None
    } else {
        Some(vals.iter().sum::<Real>() / vals.len() as Real)
    }
}

/// Fraction of the total length of `a` covered by the union of `b`
/// (`b` sorted and disjoint).
pub(crate) fn overlap_fraction(a: &[(f64, f64)], b: &[(f64, f64)]) -> f64 {
    let total: f64 = a.iter().map(|(s, e)| e - s).sum();
    if total <= 0.0 {
        return 0.0;
    }
    let covered: f64 = a
        .iter()
        .map(|&(s, e)| b.iter().map(|&(bs, be)| (e.min(be) - s.max(bs)).max(0.0)).sum::<f64>())
        .sum();
    (covered / total).min(1.0)
}
