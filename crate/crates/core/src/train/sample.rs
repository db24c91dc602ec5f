use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::TrainError;
use crate::graph::EventSubgraph;
use crate::{NodeId, Real, Seq};

/// One scored pair of the link-prediction task.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LabeledSample {
    pub seq: Seq,
    pub a: NodeId,
    pub b: NodeId,
    pub label: Real,
    pub logit: Real,
}

fn mix(mut x: u64) -> u64 {
    // splitmix64 finaliser
    x = x.wrapping_add(0x9E37_79B9_7F4A_7C15);
    x = (x ^ (x >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    x = (x ^ (x >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    x ^ (x >> 31)
}

/// Generator for one event's negatives, a pure function of its inputs so
/// sampling does not depend on execution order.
pub fn sample_rng(seed: u64, stream: u64, epoch: usize, seq: Seq) -> ChaCha8Rng {
    let s = mix(mix(mix(seed) ^ stream) ^ epoch as u64) ^ seq as u64;
    ChaCha8Rng::seed_from_u64(mix(s))
}

/// Result of [`sample_negatives`].
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct NegativeDraw {
    pub partners: Vec<NodeId>,
    /// Every node was excluded, so only `u` and `v` were left out.
    pub degraded: bool,
}

/// `count` corrupted partners for the event's source `u`, drawn uniformly
/// (with replacement) from nodes other than `u`, `v` and `u`'s current
/// out-neighbours. If that leaves nothing, falls back to excluding only `u`
/// and `v`; if even that is empty, returns no partners.
pub fn sample_negatives(sub: &EventSubgraph, count: usize, rng: &mut impl Rng) -> NegativeDraw {
    let e = &sub.event;
    let n = sub.num_nodes;
    let mut excluded: Vec<NodeId> = sub.out_neighbors(e.u);
    excluded.push(e.u);
    excluded.push(e.v);
    excluded.retain(|&x| (x as usize) < n);
    excluded.sort_unstable();
    excluded.dedup();
    let mut degraded = false;
    if excluded.len() >= n {
        degraded = true;
        excluded = vec![e.u.min(e.v), e.u.max(e.v)];
        excluded.dedup();
        excluded.retain(|&x| (x as usize) < n);
        if excluded.len() >= n {
            return NegativeDraw { partners: Vec::new(), degraded };
        }
    }
    let eligible = n - excluded.len();
    let partners = if eligible * 2 >= n {
        (0..count)
            .map(|_| loop {
                let w = rng.random_range(0..n) as NodeId;
                if excluded.binary_search(&w).is_err() {
                    break w;
                }
            })
            .collect()
    } else {
        let pool: Vec<NodeId> =
            (0..n as NodeId).filter(|w| excluded.binary_search(w).is_err()).collect();
        (0..count).map(|_| pool[rng.random_range(0..pool.len())]).collect()
    };
    NegativeDraw { partners, degraded }
}

/// Rank-based ROC AUC: the fraction of (positive, negative) pairs ordered
/// correctly, ties counting one half.
pub fn compute_auc(samples: &[(Real, bool)]) -> Result<Real, TrainError> {
    let positives = samples.iter().filter(|s| s.1).count();
    let negatives = samples.len() - positives;
    if positives == 0 || negatives == 0 {
        return Err(TrainError::DegenerateAuc { positives, negatives });
    }
    if samples.iter().any(|s| s.0.is_nan()) {
        return Err(TrainError::NonFiniteScore);
    }
    let mut sorted = samples.to_vec();
    sorted.sort_by(|a, b| a.0.total_cmp(&b.0));
    let mut negs_below = 0.0;
    let mut score = 0.0;
    let mut i = 0;
    while i < sorted.len() {
        let mut j = i;
        let (mut p, mut q) = (0.0, 0.0);
        while j < sorted.len() && sorted[j].0 == sorted[i].0 {
            if sorted[j].1 {
                p += 1.0;
            } else {
                q += 1.0;
            }
            j += 1;
        }
        score += p * negs_below + 0.5 * p * q;
        negs_below += q;
        i = j;
    }
    Ok(score / (positives as Real * negatives as Real))
}
