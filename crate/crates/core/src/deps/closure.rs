use super::{conflict, AccessSets, DepMode};
use crate::NodeId;

/// Square boolean matrix stored as packed rows.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct BitMatrix {
    n: usize,
    words: usize,
    bits: Vec<u64>,
}

impl BitMatrix {
    pub fn new(n: usize) -> Self {
        let words = n.div_ceil(64);
        BitMatrix { n, words, bits: vec![0; n * words] }
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    pub fn get(&self, i: usize, j: usize) -> bool {
        self.bits[i * self.words + j / 64] >> (j % 64) & 1 == 1
    }

    pub fn set(&mut self, i: usize, j: usize) {
        self.bits[i * self.words + j / 64] |= 1 << (j % 64);
    }

    /// `row[dst] |= row[src]`.
    pub fn or_row_into(&mut self, src: usize, dst: usize) {
        if src == dst {
            return;
        }
        for w in 0..self.words {
            let v = self.bits[src * self.words + w];
            self.bits[dst * self.words + w] |= v;
        }
    }

    pub fn count(&self) -> usize {
        self.bits.iter().map(|w| w.count_ones() as usize).sum()
    }

    /// Set pairs `(i, j)` in row-major order.
    pub fn pairs(&self) -> Vec<(usize, usize)> {
        let mut out = Vec::new();
        for i in 0..self.n {
            for j in 0..self.n {
                if self.get(i, j) {
                    out.push((i, j));
                }
            }
        }
        out
    }
}

/// Reference closure straight from the definition: test every ordered pair
/// of events for a conflict, then close transitively with Warshall's
/// algorithm. Quadratic in the window size; meant for checking.
pub fn naive_closure(affected: &[Vec<NodeId>], updates: &[Vec<NodeId>], mode: DepMode) -> BitMatrix {
    let n = affected.len();
    let mut m = BitMatrix::new(n);
    for i in 0..n {
        for j in 0..i {
            let later = AccessSets { seq: i, affected: &affected[i], update: &updates[i] };
            let earlier = AccessSets { seq: j, affected: &affected[j], update: &updates[j] };
            if conflict(later, earlier, mode) {
                m.set(i, j);
            }
        }
    }
    for k in 0..n {
        for i in 0..n {
            if m.get(i, k) {
                m.or_row_into(k, i);
            }
        }
    }
    m
}
