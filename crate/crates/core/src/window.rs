//! Window selection over an event stream: fixed-size sliding windows and
//! adaptive windows that grow while events keep touching nodes already in
//! the window.

use std::collections::HashSet;
use std::ops::Range;

use serde::{Deserialize, Serialize};

use crate::stream::Event;
use crate::{NodeId, Real, Seq};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "policy", rename_all = "snake_case")]
pub enum WindowPolicy {
    Fixed { size: usize, stride: usize },
    Adaptive { min: usize, max: usize, stride_frac: Real },
}

/// A contiguous run of events `[start, end)`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Window {
    pub start: Seq,
    pub end: Seq,
    pub policy: WindowPolicy,
}

impl Window {
    pub fn len(&self) -> usize {
        self.end - self.start
    }

    pub fn is_empty(&self) -> bool {
        self.end == self.start
    }

    pub fn range(&self) -> Range<Seq> {
        self.start..self.end
    }

    pub fn events<'a>(&self, events: &'a [Event]) -> &'a [Event] {
        &events[self.range()]
    }
}

/// Fixed window at `pos` over a stream of `m` events, and the next start.
/// An empty window means the stream is exhausted.
pub fn next_fixed_window(m: usize, pos: Seq, size: usize, stride: usize) -> (Window, Seq) {
    let policy = WindowPolicy::Fixed { size, stride };
    let start = pos.min(m);
    let end = if pos + size < m { pos + size } else { m };
    (Window { start, end, policy }, pos + stride)
}

/// All fixed windows of a stream, one per start position `0, d, 2d, ...`
/// below `m`. With `stride <= size` every event is covered.
pub fn fixed_windows(m: usize, size: usize, stride: usize) -> Vec<Window> {
    assert!(size >= 1 && stride >= 1, "window size and stride must be at least 1");
    let mut out = Vec::new();
    let mut pos = 0;
    while pos < m {
        let (w, next) = next_fixed_window(m, pos, size, stride);
        out.push(w);
        pos = next;
    }
    out
}

/// Adaptive window at `pos`: the first `min` events are taken as they are;
/// after that an event joins only if one of its endpoints already appears in
/// the window. Growth stops at the first event that does not join (it is
/// left out) or at `max` events. Returns the window and its node set.
pub fn next_adaptive_window(
    events: &[Event],
    pos: Seq,
    min: usize,
    max: usize,
    stride_frac: Real,
) -> (Window, HashSet<NodeId>) {
    let policy = WindowPolicy::Adaptive { min, max, stride_frac };
    let mut nodes = HashSet::new();
    let mut end = pos.min(events.len());
    while end < events.len() && end - pos < max {
        let e = &events[end];
        if end - pos >= min && !nodes.contains(&e.u) && !nodes.contains(&e.v) {
            break;
        }
        nodes.insert(e.u);
        nodes.insert(e.v);
        end += 1;
    }
    (Window { start: pos.min(events.len()), end, policy }, nodes)
}

/// Stride for an adaptive window of `size` events: `max(1, round(frac * size))`.
pub fn adaptive_stride(size: usize, frac: Real) -> usize {
    ((frac * size as Real).round() as usize).max(1)
}

/// All adaptive windows of a stream, each next one starting
/// `adaptive_stride(len, frac)` events after the previous start.
pub fn adaptive_windows(events: &[Event], min: usize, max: usize, stride_frac: Real) -> Vec<Window> {
    assert!(min >= 1 && min <= max, "need 1 <= min <= max");
    let mut out = Vec::new();
    let mut pos = 0;
    while pos < events.len() {
        let (w, _) = next_adaptive_window(events, pos, min, max, stride_frac);
        pos += adaptive_stride(w.len(), stride_frac);
        out.push(w);
    }
    out
}
