//! JSONL event log. Each side of the run keeps its own record list; the two
//! are merged by timestamp when the run ends.

use std::io::{self, Write};

use auv_c2_core::acoustic::{CommandCode, DropCause};
use auv_c2_core::c2::Notification;
use auv_c2_core::c2::StreamEvent;
use auv_c2_core::relay::RelayCounters;
use auv_c2_core::sim::{SimEvent, SimEventKind};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Record {
    SimEvent { event: SimEventKind, vehicle_id: u8, objective_id: Option<u8>, detail: String },
    Tx { tx_id: u64, src: u8, dst: u8, msg_type: u8, seq: u16, len: usize, tx_start_ms: u64, tx_end_ms: u64 },
    Delivery { tx_id: u64, src: u8, endpoint: u8, distance_m: f64, arrival_end_ms: u64 },
    Drop { tx_id: u64, src: u8, endpoint: u8, distance_m: f64, cause: DropCause },
    RelayCounters(RelayCounters),
    Command { vehicle_id: u8, cmd: CommandCode, cmd_seq: Option<u16> },
    Notification { notification: Notification },
    Unpinned { id: u64 },
    Chat { session: String, text: String, reply: String, intent: String, ok: bool },
}

impl Record {
    pub fn from_sim(e: &SimEvent) -> Record {
        Record::SimEvent {
            event: e.kind,
            vehicle_id: e.vehicle_id,
            objective_id: e.objective_id,
            detail: e.detail.clone(),
        }
    }

    /// Vehicle view updates are left out; they repeat what status frames
    /// already show.
    pub fn from_stream(e: StreamEvent) -> Option<Record> {
        match e {
            StreamEvent::Notification(n) => Some(Record::Notification { notification: n }),
            StreamEvent::Unpinned { id, .. } => Some(Record::Unpinned { id }),
            StreamEvent::Chat { session, text, reply, intent, ok, .. } => {
                Some(Record::Chat { session, text, reply, intent, ok })
            }
            StreamEvent::Vehicle(_) => None,
        }
    }
}

#[derive(Serialize)]
struct Line<'a> {
    t_ms: u64,
    #[serde(flatten)]
    record: &'a Record,
}

/// Append-only list of serialized lines with non-decreasing timestamps.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct EventLog {
    lines: Vec<(u64, String)>,
}

impl EventLog {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn push(&mut self, t_ms: u64, record: &Record) {
        let t_ms = t_ms.max(self.lines.last().map_or(0, |l| l.0));
        let text = serde_json::to_string(&Line { t_ms, record }).expect("records serialize");
        self.lines.push((t_ms, text));
    }

    pub fn len(&self) -> usize {
        self.lines.len()
    }

    pub fn is_empty(&self) -> bool {
        self.lines.is_empty()
    }

    pub fn lines(&self) -> impl Iterator<Item = &str> {
        self.lines.iter().map(|(_, l)| l.as_str())
    }

    pub fn write_to(&self, mut w: impl Write) -> io::Result<()> {
        for (_, l) in &self.lines {
            writeln!(w, "{l}")?;
        }
        w.flush()
    }

    /// Parses a log previously written with `write_to`.
    pub fn parse(text: &str) -> Result<EventLog, String> {
        let mut log = EventLog::new();
        for (i, line) in text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty()) {
            #[derive(Deserialize)]
            struct Stamp {
                t_ms: u64,
            }
            let s: Stamp = serde_json::from_str(line).map_err(|e| format!("line {}: {e}", i + 1))?;
            log.lines.push((s.t_ms, line.to_string()));
        }
        Ok(log)
    }

    /// Stable merge by timestamp; on ties `self` comes first.
    pub fn merge(&self, other: &EventLog) -> EventLog {
        let mut out = Vec::with_capacity(self.lines.len() + other.lines.len());
        let (mut a, mut b) = (self.lines.iter().peekable(), other.lines.iter().peekable());
        loop {
            let take_a = match (a.peek(), b.peek()) {
                (Some(x), Some(y)) => x.0 <= y.0,
                (Some(_), None) => true,
                (None, Some(_)) => false,
                (None, None) => break,
            };
            let next = if take_a { a.next() } else { b.next() };
            out.push(next.expect("peeked").clone());
        }
        EventLog { lines: out }
    }
}
