//! Host-side execution traces and the validator for the tracer's
//! line-delimited event stream.
//!
//! Stream format: one compact JSON object per event, then one summary object.
//!
//! ```text
//! {"step":0,"event_kind":"call","line_no":1,"locals_delta":{"arr":"[1, 0]"}}
//! {"step":1,"event_kind":"line","line_no":2,"stdout_delta":"hi\n"}
//! {"return_value_literal":"1","stdout":"hi\n","outcome":{"status":"ok"},"event_count":2,"serialized_bytes":113}
//! ```
//!
//! Empty deltas may be omitted. `serialized_bytes` counts event lines
//! including their newline; the summary line is not counted.

use indexmap::IndexMap;
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub const DEFAULT_MAX_EVENTS: usize = 10_000;
pub const DEFAULT_MAX_BYTES: u64 = 1_048_576;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EventKind {
    Call,
    Line,
    Return,
    Exception,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TraceEvent {
    pub step: u64,
    pub event_kind: EventKind,
    pub line_no: u32,
    #[serde(default, skip_serializing_if = "IndexMap::is_empty")]
    pub locals_delta: IndexMap<String, String>,
    #[serde(default, skip_serializing_if = "IndexMap::is_empty")]
    pub globals_delta: IndexMap<String, String>,
    #[serde(default, skip_serializing_if = "String::is_empty")]
    pub stdout_delta: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "status", rename_all = "snake_case")]
pub enum TraceOutcome {
    Ok,
    RuntimeError { kind: String, message: String },
    Timeout,
    TooLong,
    TooLarge,
}

impl TraceOutcome {
    pub fn is_ok(&self) -> bool {
        matches!(self, TraceOutcome::Ok)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct TraceCaps {
    pub max_events: usize,
    pub max_bytes: u64,
}

impl Default for TraceCaps {
    fn default() -> Self {
        TraceCaps { max_events: DEFAULT_MAX_EVENTS, max_bytes: DEFAULT_MAX_BYTES }
    }
}

/// Summary line closing an event stream.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TraceSummary {
    pub return_value_literal: Option<String>,
    pub stdout: String,
    pub outcome: TraceOutcome,
    pub event_count: usize,
    pub serialized_bytes: u64,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ExecutionTrace {
    pub events: Vec<TraceEvent>,
    pub return_value_literal: Option<String>,
    pub stdout: String,
    pub outcome: TraceOutcome,
    pub event_count: usize,
    pub serialized_bytes: u64,
}

impl ExecutionTrace {
    /// Concatenation of every event's stdout delta.
    pub fn replay_stdout(&self) -> String {
        self.events.iter().map(|e| e.stdout_delta.as_str()).collect()
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum TraceError {
    #[error("could not start tracer: {0}")]
    SpawnFailure(String),
    #[error("tracer stream desynchronised at line {line}: {message}")]
    StreamDesync { line: usize, message: String },
}

#[derive(Deserialize)]
#[serde(untagged)]
enum StreamLine {
    Event(TraceEvent),
    Summary(TraceSummary),
}

/// What the caller should do after feeding a line.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Feed {
    Continue,
    /// A cap was exceeded on the host side; stop reading.
    CapExceeded,
    Finished,
}

/// Incremental validator for a tracer stream. Enforces contiguous steps and
/// the caps, independently of whatever the shim reports.
#[derive(Debug)]
pub struct StreamReader {
    caps: TraceCaps,
    events: Vec<TraceEvent>,
    bytes: u64,
    lines: usize,
    exceeded: Option<TraceOutcome>,
    summary: Option<TraceSummary>,
}

impl StreamReader {
    pub fn new(caps: TraceCaps) -> Self {
        StreamReader { caps, events: Vec::new(), bytes: 0, lines: 0, exceeded: None, summary: None }
    }

    pub fn feed(&mut self, line: &str) -> Result<Feed, TraceError> {
        self.lines += 1;
        let desync = |message: String| TraceError::StreamDesync { line: self.lines, message };
        if self.summary.is_some() {
            return Err(desync("data after summary line".into()));
        }
        if self.exceeded.is_some() {
            return Ok(Feed::CapExceeded);
        }
        let parsed: StreamLine = serde_json::from_str(line).map_err(|e| desync(e.to_string()))?;
        match parsed {
            StreamLine::Event(event) => {
                let expected = self.events.len() as u64;
                if event.step != expected {
                    return Err(desync(format!("expected step {expected}, got {}", event.step)));
                }
                self.bytes += line.len() as u64 + 1;
                self.events.push(event);
                if self.events.len() > self.caps.max_events {
                    self.exceeded = Some(TraceOutcome::TooLong);
                } else if self.bytes > self.caps.max_bytes {
                    self.exceeded = Some(TraceOutcome::TooLarge);
                }
                Ok(if self.exceeded.is_some() { Feed::CapExceeded } else { Feed::Continue })
            }
            StreamLine::Summary(summary) => {
                let over_cap = matches!(summary.outcome, TraceOutcome::TooLong | TraceOutcome::TooLarge);
                if summary.event_count != self.events.len() && !over_cap {
                    return Err(desync(format!(
                        "summary reports {} events, stream carried {}",
                        summary.event_count,
                        self.events.len()
                    )));
                }
                self.summary = Some(summary);
                Ok(Feed::Finished)
            }
        }
    }

    pub fn event_count(&self) -> usize {
        self.events.len()
    }

    /// Closes the stream. `interrupted` carries the outcome to use when the
    /// stream ended without a summary (timeout or a killed shim).
    pub fn finish(self, interrupted: TraceOutcome) -> ExecutionTrace {
        let event_count = self.events.len();
        let serialized_bytes = self.bytes;
        let replayed: String = self.events.iter().map(|e| e.stdout_delta.as_str()).collect();
        if let Some(outcome) = self.exceeded {
            return ExecutionTrace {
                events: self.events,
                return_value_literal: None,
                stdout: replayed,
                outcome,
                event_count,
                serialized_bytes,
            };
        }
        match self.summary {
            Some(s) => ExecutionTrace {
                events: self.events,
                return_value_literal: if s.outcome.is_ok() { s.return_value_literal } else { None },
                stdout: s.stdout,
                outcome: s.outcome,
                event_count,
                serialized_bytes,
            },
            None => ExecutionTrace {
                events: self.events,
                return_value_literal: None,
                stdout: replayed,
                outcome: interrupted,
                event_count,
                serialized_bytes,
            },
        }
    }
}
