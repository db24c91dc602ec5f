//! Events and graph streams.
//!
//! A graph stream is an initial graph plus a chronologically ordered list of
//! update events `(u, v, t, kind)`. Events carry their 0-based position in the
//! stream as `seq`; ties in `t` are ordered by `seq`.

mod io;
mod synth;

use std::collections::HashSet;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::{NodeId, Seq};

pub use io::{parse_event_line, read_stream, read_stream_from, write_stream, ReadOptions};
pub use synth::{generate_synthetic_stream, ClusterSpan, SynthConfig, SyntheticStream};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum StreamError {
    #[error("line {line}: expected 4 or 5 comma-separated fields, found {found}")]
    FieldCount { line: usize, found: usize },
    #[error("line {line}: invalid node id {text:?}")]
    BadNodeId { line: usize, text: String },
    #[error("line {line}: invalid timestamp {text:?}")]
    BadTimestamp { line: usize, text: String },
    #[error("line {line}: negative timestamp {t}")]
    NegativeTimestamp { line: usize, t: f64 },
    #[error("line {line}: invalid weight {text:?}")]
    BadWeight { line: usize, text: String },
    #[error("line {line}: unknown event kind {text:?}")]
    UnknownKind { line: usize, text: String },
    #[error("line {line}: malformed header {text:?}")]
    BadHeader { line: usize, text: String },
    #[error("stream failed validation: {0}")]
    Invalid(ValidationReport),
    #[error("invalid generator arguments: {0}")]
    BadGeneratorArgs(String),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EventKind {
    AddEdge,
    DeleteEdge,
    AddNode,
    Interact,
    UpdateFeature,
}

impl EventKind {
    pub fn as_str(self) -> &'static str {
        match self {
            EventKind::AddEdge => "add_edge",
            EventKind::DeleteEdge => "del_edge",
            EventKind::AddNode => "add_node",
            EventKind::Interact => "interact",
            EventKind::UpdateFeature => "feat",
        }
    }

    /// Kinds that may legitimately name a single node (`u == v`).
    pub fn allows_single_node(self) -> bool {
        matches!(self, EventKind::AddNode | EventKind::UpdateFeature)
    }
}

impl fmt::Display for EventKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for EventKind {
    type Err = ();

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Ok(match s {
            "add_edge" => EventKind::AddEdge,
            "del_edge" => EventKind::DeleteEdge,
            "add_node" => EventKind::AddNode,
            "interact" => EventKind::Interact,
            "feat" => EventKind::UpdateFeature,
            _ => return Err(()),
        })
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Event {
    pub seq: Seq,
    pub u: NodeId,
    pub v: NodeId,
    pub t: f64,
    pub kind: EventKind,
    pub weight: f64,
}

impl Event {
    pub fn new(seq: Seq, u: NodeId, v: NodeId, t: f64, kind: EventKind) -> Self {
        Event { seq, u, v, t, kind, weight: 1.0 }
    }

    pub fn is_single_node(&self) -> bool {
        self.u == self.v
    }

    /// The event's endpoints, deduplicated.
    pub fn endpoints(&self) -> Vec<NodeId> {
        if self.u == self.v {
            vec![self.u]
        } else {
            vec![self.u, self.v]
        }
    }
}

/// An edge present before the first event.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct InitialEdge {
    pub u: NodeId,
    pub v: NodeId,
    pub weight: f64,
    pub t: f64,
}

/// `(G0, events)`: initial node count and edges, then the event sequence.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct GraphStream {
    pub num_nodes: usize,
    pub initial_edges: Vec<InitialEdge>,
    pub events: Vec<Event>,
}

impl GraphStream {
    pub fn new(num_nodes: usize, events: Vec<Event>) -> Self {
        GraphStream { num_nodes, initial_edges: Vec::new(), events }
    }

    pub fn len(&self) -> usize {
        self.events.len()
    }

    pub fn is_empty(&self) -> bool {
        self.events.is_empty()
    }

    /// Node count once every `AddNode` event has been applied.
    pub fn total_nodes(&self) -> usize {
        self.num_nodes + self.events.iter().filter(|e| e.kind == EventKind::AddNode).count()
    }

    /// Rewrites every event's `seq` to its position.
    pub fn renumber(&mut self) {
        for (i, e) in self.events.iter_mut().enumerate() {
            e.seq = i;
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Violation {
    SeqOutOfOrder { expected: Seq },
    TimestampDecrease { prev: f64, t: f64 },
    UnknownNode { node: NodeId },
    BadAddNode { expected: NodeId },
    SelfLoop,
    MissingEdge { u: NodeId, v: NodeId },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Issue {
    pub seq: Seq,
    pub violation: Violation,
}

/// Result of [`validate_stream`]; empty for a valid stream.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct ValidationReport {
    pub issues: Vec<Issue>,
}

impl ValidationReport {
    pub fn is_valid(&self) -> bool {
        self.issues.is_empty()
    }

    pub fn first(&self) -> Option<&Issue> {
        self.issues.first()
    }
}

impl fmt::Display for ValidationReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.issues.as_slice() {
            [] => f.write_str("no issues"),
            [first, rest @ ..] => {
                write!(f, "seq {}: {:?}", first.seq, first.violation)?;
                if !rest.is_empty() {
                    write!(f, " (+{} more)", rest.len())?;
                }
                Ok(())
            }
        }
    }
}

/// Replays the stream against a plain edge set and reports every violation.
pub fn validate_stream(stream: &GraphStream) -> ValidationReport {
    let mut issues = Vec::new();
    let mut push = |seq, violation| issues.push(Issue { seq, violation });

    let mut nodes = stream.num_nodes as u64;
    let mut edges: HashSet<(NodeId, NodeId)> = HashSet::new();
    for e in &stream.initial_edges {
        edges.insert((e.u, e.v));
    }
    let mut prev_t = f64::NEG_INFINITY;

    for (i, e) in stream.events.iter().enumerate() {
        if e.seq != i {
            push(e.seq, Violation::SeqOutOfOrder { expected: i });
        }
        if e.t < prev_t {
            push(e.seq, Violation::TimestampDecrease { prev: prev_t, t: e.t });
        }
        prev_t = prev_t.max(e.t);

        if e.kind == EventKind::AddNode {
            if e.u as u64 != nodes || e.v != e.u {
                push(e.seq, Violation::BadAddNode { expected: nodes as NodeId });
            } else {
                nodes += 1;
            }
            continue;
        }
        let mut known = true;
        for n in [e.u, e.v] {
            if n as u64 >= nodes {
                push(e.seq, Violation::UnknownNode { node: n });
                known = false;
            }
        }
        if e.u == e.v && !e.kind.allows_single_node() {
            push(e.seq, Violation::SelfLoop);
            continue;
        }
        if !known {
            continue;
        }
        match e.kind {
            EventKind::AddEdge => {
                edges.insert((e.u, e.v));
            }
            EventKind::DeleteEdge => {
                if !edges.remove(&(e.u, e.v)) {
                    push(e.seq, Violation::MissingEdge { u: e.u, v: e.v });
                }
            }
            _ => {}
        }
    }
    ValidationReport { issues }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn stream_with_times(ts: &[f64]) -> GraphStream {
        let events = ts
            .iter()
            .enumerate()
            .map(|(i, &t)| Event::new(i, 0, 1, t, EventKind::Interact))
            .collect();
        GraphStream::new(2, events)
    }

    #[test]
    fn monotone_times_are_valid() {
        assert!(validate_stream(&stream_with_times(&[1.0, 2.0, 3.0])).is_valid());
    }

    #[test]
    fn decreasing_time_reported_at_its_seq() {
        let report = validate_stream(&stream_with_times(&[1.0, 3.0, 2.0]));
        let first = report.first().unwrap();
        assert_eq!(first.seq, 2);
        assert!(matches!(first.violation, Violation::TimestampDecrease { .. }));
    }

    #[test]
    fn delete_before_add_is_reported() {
        let s = GraphStream::new(
            3,
            vec![
                Event::new(0, 0, 2, 0.0, EventKind::AddEdge),
                Event::new(1, 1, 2, 1.0, EventKind::DeleteEdge),
                Event::new(2, 1, 2, 2.0, EventKind::AddEdge),
                Event::new(3, 1, 2, 3.0, EventKind::DeleteEdge),
            ],
        );
        let report = validate_stream(&s);
        assert_eq!(report.issues.len(), 1);
        assert_eq!(report.issues[0].seq, 1);
    }

    #[test]
    fn add_node_must_use_next_id() {
        let s = GraphStream::new(
            2,
            vec![
                Event::new(0, 2, 2, 0.0, EventKind::AddNode),
                Event::new(1, 4, 4, 1.0, EventKind::AddNode),
                Event::new(2, 0, 3, 1.0, EventKind::Interact),
            ],
        );
        let report = validate_stream(&s);
        assert_eq!(report.issues.len(), 2);
        assert_eq!(report.issues[0].seq, 1);
        assert_eq!(report.issues[1].violation, Violation::UnknownNode { node: 3 });
        assert_eq!(s.total_nodes(), 4);
    }

    #[test]
    fn self_loop_edges_rejected_but_feature_updates_allowed() {
        let s = GraphStream::new(
            2,
            vec![
                Event::new(0, 1, 1, 0.0, EventKind::UpdateFeature),
                Event::new(1, 1, 1, 0.0, EventKind::AddEdge),
            ],
        );
        let report = validate_stream(&s);
        assert_eq!(report.issues, vec![Issue { seq: 1, violation: Violation::SelfLoop }]);
    }
}
