//! Per-event trace records and their two on-disk formats.
//!
//! * `table`: comma-separated, one header row, columns
//!   `event_index,time,firers,kind,phase_0..phase_{N-1},delta_0..delta_{N-1},p_after,predicted_dp`.
//!   Firers are `;`-separated ids, reals carry 17 significant digits, and an
//!   absent `predicted_dp` is an empty cell.
//! * `objects`: one JSON object per line with the field names of
//!   [`TraceRecord`].
//!
//! Both formats read back bit-identical reals.

use std::io::{self, Read, Write};
use std::str::FromStr;

use desync_core::{EventKind, Observation, PulseEvent};
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum RecordKind {
    Active,
    Silent,
    Collision,
}

impl From<EventKind> for RecordKind {
    fn from(kind: EventKind) -> Self {
        match kind {
            EventKind::Active => RecordKind::Active,
            EventKind::Silent => RecordKind::Silent,
            EventKind::Collision => RecordKind::Collision,
        }
    }
}

impl RecordKind {
    fn as_str(self) -> &'static str {
        match self {
            RecordKind::Active => "Active",
            RecordKind::Silent => "Silent",
            RecordKind::Collision => "Collision",
        }
    }
}

impl FromStr for RecordKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "Active" => Ok(RecordKind::Active),
            "Silent" => Ok(RecordKind::Silent),
            "Collision" => Ok(RecordKind::Collision),
            other => Err(format!("unknown event kind {other:?}")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceRecord {
    pub event_index: usize,
    pub time: f64,
    pub firers: Vec<usize>,
    pub kind: RecordKind,
    pub phases_after: Vec<f64>,
    pub deltas_after: Vec<f64>,
    pub p_after: f64,
    pub predicted_dp: Option<f64>,
}

impl TraceRecord {
    pub fn new(event_index: usize, event: &PulseEvent, obs: &Observation) -> Self {
        TraceRecord {
            event_index,
            time: event.time,
            firers: event.firers.iter().map(|id| id.index()).collect(),
            kind: event.kind.into(),
            phases_after: event.phases_after().iter().map(|p| p.value()).collect(),
            deltas_after: obs.deltas_after.as_slice().to_vec(),
            p_after: obs.p_after.value(),
            predicted_dp: obs.predicted_dp,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum TraceFormat {
    #[default]
    Table,
    Objects,
}

impl TraceFormat {
    pub fn extension(self) -> &'static str {
        match self {
            TraceFormat::Table => "csv",
            TraceFormat::Objects => "jsonl",
        }
    }
}

#[derive(Debug, Error)]
pub enum TraceError {
    #[error("writing record {index}: {source}")]
    Write { index: usize, source: io::Error },
    #[error("writing header: {0}")]
    Header(io::Error),
    #[error("record {index} has {got} phases, trace was opened for {expected}")]
    Width { index: usize, expected: usize, got: usize },
    #[error("reading line {line}: {message}")]
    Parse { line: usize, message: String },
}

fn real(x: f64) -> String {
    format!("{x:.16e}")
}

fn csv_io(e: csv::Error) -> io::Error {
    match e.into_kind() {
        csv::ErrorKind::Io(e) => e,
        other => io::Error::other(format!("{other:?}")),
    }
}

/// Streams records to a sink in one of the two formats.
pub struct TraceWriter<W: Write> {
    format: TraceFormat,
    n: usize,
    written: usize,
    table: Option<csv::Writer<W>>,
    objects: Option<W>,
}

impl<W: Write> TraceWriter<W> {
    /// Opens a trace for a network of `n` oscillators. The table header is
    /// written immediately, so an empty trace is still a valid table.
    pub fn new(sink: W, format: TraceFormat, n: usize) -> Result<Self, TraceError> {
        let mut w = TraceWriter {
            format,
            n,
            written: 0,
            table: None,
            objects: None,
        };
        match format {
            TraceFormat::Table => {
                let mut table = csv::WriterBuilder::new().has_headers(false).from_writer(sink);
                table
                    .write_record(table_header(n))
                    .map_err(|e| TraceError::Header(csv_io(e)))?;
                w.table = Some(table);
            }
            TraceFormat::Objects => w.objects = Some(sink),
        }
        Ok(w)
    }

    pub fn write(&mut self, rec: &TraceRecord) -> Result<(), TraceError> {
        let index = rec.event_index;
        if rec.phases_after.len() != self.n || rec.deltas_after.len() != self.n {
            return Err(TraceError::Width {
                index,
                expected: self.n,
                got: rec.phases_after.len(),
            });
        }
        match self.format {
            TraceFormat::Table => {
                let mut row = Vec::with_capacity(2 * self.n + 6);
                row.push(rec.event_index.to_string());
                row.push(real(rec.time));
                row.push(
                    rec.firers
                        .iter()
                        .map(|f| f.to_string())
                        .collect::<Vec<_>>()
                        .join(";"),
                );
                row.push(rec.kind.as_str().to_string());
                row.extend(rec.phases_after.iter().map(|&x| real(x)));
                row.extend(rec.deltas_after.iter().map(|&x| real(x)));
                row.push(real(rec.p_after));
                row.push(rec.predicted_dp.map(real).unwrap_or_default());
                let table = self.table.as_mut().expect("table sink");
                table
                    .write_record(&row)
                    .map_err(|e| TraceError::Write { index, source: csv_io(e) })?;
            }
            TraceFormat::Objects => {
                let sink = self.objects.as_mut().expect("object sink");
                serde_json::to_writer(&mut *sink, rec)
                    .map_err(|e| TraceError::Write { index, source: e.into() })?;
                sink.write_all(b"\n")
                    .map_err(|source| TraceError::Write { index, source })?;
            }
        }
        self.written += 1;
        Ok(())
    }

    pub fn write_all<'a>(
        &mut self,
        records: impl IntoIterator<Item = &'a TraceRecord>,
    ) -> Result<(), TraceError> {
        records.into_iter().try_for_each(|r| self.write(r))
    }

    /// Flushes and returns the sink.
    pub fn finish(self) -> Result<W, TraceError> {
        let index = self.written;
        let flush_err = |source| TraceError::Write { index, source };
        match self.format {
            TraceFormat::Table => self
                .table
                .expect("table sink")
                .into_inner()
                .map_err(|e| flush_err(io::Error::other(e.to_string()))),
            TraceFormat::Objects => {
                let mut sink = self.objects.expect("object sink");
                sink.flush().map_err(flush_err)?;
                Ok(sink)
            }
        }
    }
}

fn table_header(n: usize) -> Vec<String> {
    let mut h: Vec<String> = ["event_index", "time", "firers", "kind"]
        .iter()
        .map(|s| s.to_string())
        .collect();
    h.extend((0..n).map(|i| format!("phase_{i}")));
    h.extend((0..n).map(|i| format!("delta_{i}")));
    h.push("p_after".into());
    h.push("predicted_dp".into());
    h
}

/// Convenience: writes `records` to a fresh buffer.
pub fn write_trace(records: &[TraceRecord], format: TraceFormat, n: usize) -> Result<Vec<u8>, TraceError> {
    let mut w = TraceWriter::new(Vec::new(), format, n)?;
    w.write_all(records)?;
    w.finish()
}

pub fn read_trace<R: Read>(source: R, format: TraceFormat) -> Result<Vec<TraceRecord>, TraceError> {
    match format {
        TraceFormat::Table => read_table(source),
        TraceFormat::Objects => {
            let mut text = String::new();
            io::BufReader::new(source)
                .read_to_string(&mut text)
                .map_err(|e| TraceError::Parse { line: 0, message: e.to_string() })?;
            text.lines()
                .enumerate()
                .filter(|(_, l)| !l.trim().is_empty())
                .map(|(i, l)| {
                    serde_json::from_str(l).map_err(|e| TraceError::Parse {
                        line: i + 1,
                        message: e.to_string(),
                    })
                })
                .collect()
        }
    }
}

fn read_table<R: Read>(source: R) -> Result<Vec<TraceRecord>, TraceError> {
    let mut reader = csv::ReaderBuilder::new().has_headers(true).from_reader(source);
    let header = reader
        .headers()
        .map_err(|e| TraceError::Parse { line: 1, message: e.to_string() })?
        .clone();
    let n = header.iter().filter(|h| h.starts_with("phase_")).count();
    if header.len() != 2 * n + 6 {
        return Err(TraceError::Parse {
            line: 1,
            message: format!("header has {} columns, expected {}", header.len(), 2 * n + 6),
        });
    }
    let mut out = Vec::new();
    for (i, row) in reader.records().enumerate() {
        let line = i + 2;
        let err = |message: String| TraceError::Parse { line, message };
        let row = row.map_err(|e| err(e.to_string()))?;
        let num = |col: usize| -> Result<f64, TraceError> {
            row[col].parse::<f64>().map_err(|e| err(format!("column {}: {e}", &header[col])))
        };
        let firers = if row[2].is_empty() {
            Vec::new()
        } else {
            row[2]
                .split(';')
                .map(|s| s.parse::<usize>().map_err(|e| err(format!("firers: {e}"))))
                .collect::<Result<_, _>>()?
        };
        out.push(TraceRecord {
            event_index: row[0].parse().map_err(|e| err(format!("event_index: {e}")))?,
            time: num(1)?,
            firers,
            kind: row[3].parse().map_err(err)?,
            phases_after: (4..4 + n).map(num).collect::<Result<_, _>>()?,
            deltas_after: (4 + n..4 + 2 * n).map(num).collect::<Result<_, _>>()?,
            p_after: num(4 + 2 * n)?,
            predicted_dp: if row[5 + 2 * n].is_empty() {
                None
            } else {
                Some(num(5 + 2 * n)?)
            },
        });
    }
    Ok(out)
}
