//! Session logs: one JSON object per line, record types `pos`, `event`,
//! `trial_start` and `trial_end`.

use std::fs::File;
use std::io::{self, BufRead, BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};
use sonic_guide::{DisplacementVector, EarconKind, Mode};

use crate::session::TrialRecord;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum LogRecord {
    /// An accepted position; `t` is session time (seconds since the first
    /// timestamp of the session).
    Pos {
        t: f64,
        x: f32,
        y: f32,
        z: f32,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        trial: Option<u64>,
    },
    Event {
        t: f64,
        kind: EarconKind,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        trial: Option<u64>,
    },
    TrialStart {
        trial: u64,
        t: f64,
        mode: Mode,
        start: [f32; 3],
        target_radius: f64,
        seed: u64,
    },
    TrialEnd(Box<TrialRecord>),
}

pub trait LogSink: Send {
    fn record(&mut self, rec: &LogRecord);
}

/// Discards everything.
#[derive(Debug, Default)]
pub struct NullLog;

impl LogSink for NullLog {
    fn record(&mut self, _: &LogRecord) {}
}

/// Keeps records in memory (tests, the simulated operator).
#[derive(Debug, Default, Clone)]
pub struct MemoryLog {
    pub records: Vec<LogRecord>,
}

impl LogSink for MemoryLog {
    fn record(&mut self, rec: &LogRecord) {
        self.records.push(rec.clone());
    }
}

/// Appends JSON lines to a writer, flushing after each record so a crashed
/// session still leaves a readable log.
pub struct JsonLinesLog<W: Write + Send> {
    out: W,
    failed: bool,
}

impl<W: Write + Send> JsonLinesLog<W> {
    pub fn new(out: W) -> Self {
        JsonLinesLog { out, failed: false }
    }

    /// Whether any write has failed; logging failures never stop a session.
    pub fn failed(&self) -> bool {
        self.failed
    }

    pub fn into_inner(self) -> W {
        self.out
    }
}

impl JsonLinesLog<BufWriter<File>> {
    pub fn create(path: impl AsRef<Path>) -> io::Result<Self> {
        Ok(Self::new(BufWriter::new(File::create(path)?)))
    }
}

impl<W: Write + Send> LogSink for JsonLinesLog<W> {
    fn record(&mut self, rec: &LogRecord) {
        let line = serde_json::to_string(rec).expect("log records always serialize");
        let ok = writeln!(self.out, "{line}").and_then(|_| self.out.flush());
        self.failed |= ok.is_err();
    }
}

pub fn read_log(reader: impl BufRead) -> Result<Vec<LogRecord>, String> {
    let mut out = Vec::new();
    for (i, line) in reader.lines().enumerate() {
        let line = line.map_err(|e| e.to_string())?;
        if line.trim().is_empty() {
            continue;
        }
        out.push(serde_json::from_str(&line).map_err(|e| format!("line {}: {e}", i + 1))?);
    }
    Ok(out)
}

/// The accepted positions of a log, in order, as `(t, d)` pairs.
pub fn positions(records: &[LogRecord]) -> Vec<(f64, DisplacementVector)> {
    records
        .iter()
        .filter_map(|r| match r {
            LogRecord::Pos { t, x, y, z, .. } => Some((*t, DisplacementVector { x: *x, y: *y, z: *z })),
            _ => None,
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn json_lines_round_trip() {
        let recs = vec![
            LogRecord::Pos { t: 0.0, x: 0.1, y: 0.2, z: 0.3, trial: None },
            LogRecord::Event { t: 0.5, kind: EarconKind::Triad, trial: Some(1) },
            LogRecord::TrialStart {
                trial: 1,
                t: 0.0,
                mode: Mode::TwoD,
                start: [0.8, 0.0, 0.0],
                target_radius: 0.05,
                seed: 3,
            },
        ];
        let mut log = JsonLinesLog::new(Vec::new());
        for r in &recs {
            log.record(r);
        }
        let bytes = log.into_inner();
        let text = String::from_utf8(bytes).unwrap();
        assert_eq!(text.lines().count(), 3);
        assert!(text.starts_with(r#"{"type":"pos","t":0.0"#));
        assert_eq!(read_log(text.as_bytes()).unwrap(), recs);
        assert_eq!(positions(&recs).len(), 1);
    }
}
