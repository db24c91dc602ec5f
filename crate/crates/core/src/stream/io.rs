//! Edge-list text format.
//!
//! One event per line: `u,v,t,kind[,weight]`. Lines starting with `#` are
//! comments except for two headers: `#nodes=N` (initial node count) and
//! `#edge=u,v,w,t` (an edge of the initial graph).

use std::fs::File;
use std::io::{BufRead, BufReader, Write};
use std::path::Path;

use super::{validate_stream, Event, EventKind, GraphStream, InitialEdge, StreamError};
use crate::{Error, NodeId};

#[derive(Clone, Copy, Debug, Default)]
pub struct ReadOptions {
    /// Downgrade validation failures to a logged warning.
    pub lenient: bool,
}

fn parse_node(field: &str, line: usize) -> Result<NodeId, StreamError> {
    field
        .trim()
        .parse()
        .map_err(|_| StreamError::BadNodeId { line, text: field.to_string() })
}

fn parse_time(field: &str, line: usize) -> Result<f64, StreamError> {
    let t: f64 = field
        .trim()
        .parse()
        .map_err(|_| StreamError::BadTimestamp { line, text: field.to_string() })?;
    if !t.is_finite() {
        return Err(StreamError::BadTimestamp { line, text: field.to_string() });
    }
    if t < 0.0 {
        return Err(StreamError::NegativeTimestamp { line, t });
    }
    Ok(t)
}

fn parse_weight(field: &str, line: usize) -> Result<f64, StreamError> {
    match field.trim().parse::<f64>() {
        Ok(w) if w.is_finite() => Ok(w),
        _ => Err(StreamError::BadWeight { line, text: field.to_string() }),
    }
}

fn parse_line_at(text: &str, line: usize) -> Result<Event, StreamError> {
    let fields: Vec<&str> = text.trim().split(',').collect();
    if !(4..=5).contains(&fields.len()) {
        return Err(StreamError::FieldCount { line, found: fields.len() });
    }
    let u = parse_node(fields[0], line)?;
    let v = parse_node(fields[1], line)?;
    let t = parse_time(fields[2], line)?;
    let kind: EventKind = fields[3]
        .trim()
        .parse()
        .map_err(|_| StreamError::UnknownKind { line, text: fields[3].to_string() })?;
    let weight = match fields.get(4) {
        Some(w) => parse_weight(w, line)?,
        None => 1.0,
    };
    Ok(Event { seq: 0, u, v, t, kind, weight })
}

/// Parses one event line. The returned event has `seq == 0`; stream readers
/// assign positions.
pub fn parse_event_line(line: &str) -> Result<Event, StreamError> {
    parse_line_at(line, 1)
}

fn parse_initial_edge(text: &str, line: usize) -> Result<InitialEdge, StreamError> {
    let bad = || StreamError::BadHeader { line, text: text.to_string() };
    let fields: Vec<&str> = text.split(',').collect();
    if fields.len() != 4 {
        return Err(bad());
    }
    Ok(InitialEdge {
        u: parse_node(fields[0], line)?,
        v: parse_node(fields[1], line)?,
        weight: parse_weight(fields[2], line)?,
        t: parse_time(fields[3], line)?,
    })
}

pub fn read_stream_from<R: BufRead>(reader: R, opts: ReadOptions) -> crate::Result<GraphStream> {
    let mut header_nodes = None;
    let mut initial_edges = Vec::new();
    let mut events = Vec::new();

    for (idx, line) in reader.lines().enumerate() {
        let line = line?;
        let lineno = idx + 1;
        let text = line.trim();
        if text.is_empty() {
            continue;
        }
        if let Some(header) = text.strip_prefix('#') {
            let header = header.trim();
            if let Some(n) = header.strip_prefix("nodes=") {
                let n = n
                    .trim()
                    .parse()
                    .map_err(|_| StreamError::BadHeader { line: lineno, text: text.to_string() })?;
                header_nodes = Some(n);
            } else if let Some(edge) = header.strip_prefix("edge=") {
                initial_edges.push(parse_initial_edge(edge, lineno)?);
            }
            continue;
        }
        let mut event = parse_line_at(text, lineno)?;
        event.seq = events.len();
        events.push(event);
    }

    let num_nodes = header_nodes.unwrap_or_else(|| infer_node_count(&initial_edges, &events));
    let stream = GraphStream { num_nodes, initial_edges, events };
    let report = validate_stream(&stream);
    if !report.is_valid() {
        if opts.lenient {
            log::warn!("stream validation: {report}");
        } else {
            return Err(Error::Stream(StreamError::Invalid(report)));
        }
    }
    Ok(stream)
}

/// Reads an edge-list stream file and validates it.
pub fn read_stream(path: impl AsRef<Path>, opts: ReadOptions) -> crate::Result<GraphStream> {
    let file = File::open(path)?;
    read_stream_from(BufReader::new(file), opts)
}

// Without a header: nodes introduced by AddNode start at the smallest AddNode
// id; otherwise the node count is max id + 1.
fn infer_node_count(initial: &[InitialEdge], events: &[Event]) -> usize {
    if let Some(first_added) =
        events.iter().filter(|e| e.kind == EventKind::AddNode).map(|e| e.u).min()
    {
        return first_added as usize;
    }
    let max_event = events.iter().map(|e| e.u.max(e.v)).max();
    let max_init = initial.iter().map(|e| e.u.max(e.v)).max();
    match max_event.max(max_init) {
        Some(m) => m as usize + 1,
        None => 0,
    }
}

/// Writes the stream in the edge-list format; timestamps use 6 decimals.
pub fn write_stream<W: Write>(stream: &GraphStream, mut out: W) -> std::io::Result<()> {
    writeln!(out, "#nodes={}", stream.num_nodes)?;
    for e in &stream.initial_edges {
        writeln!(out, "#edge={},{},{},{:.6}", e.u, e.v, e.weight, e.t)?;
    }
    for e in &stream.events {
        write!(out, "{},{},{:.6},{}", e.u, e.v, e.t, e.kind)?;
        if e.weight != 1.0 {
            write!(out, ",{}", e.weight)?;
        }
        writeln!(out)?;
    }
    out.flush()
}
