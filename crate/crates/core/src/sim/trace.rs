//! Newline-delimited JSON event trace.
//!
//! Besides message events the stream carries region begin/end markers so a
//! reader can rebuild region instances without consulting the profiler.

use crate::model::{Labels, MessageEvent, RankId};
use serde::{Deserialize, Serialize};
use std::fs::File;
use std::io::{self, BufRead, BufReader, BufWriter, Write};
use std::path::Path;

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum TraceRecord {
    Begin {
        rank: RankId,
        seq: u64,
        name: String,
        #[serde(default)]
        labels: Labels,
        t_ns: u64,
    },
    End {
        rank: RankId,
        seq: u64,
        name: String,
        t_ns: u64,
    },
    Event {
        rank: RankId,
        #[serde(flatten)]
        event: MessageEvent,
    },
}

impl TraceRecord {
    pub fn rank(&self) -> RankId {
        match self {
            TraceRecord::Begin { rank, .. }
            | TraceRecord::End { rank, .. }
            | TraceRecord::Event { rank, .. } => *rank,
        }
    }

    pub fn seq(&self) -> u64 {
        match self {
            TraceRecord::Begin { seq, .. } | TraceRecord::End { seq, .. } => *seq,
            TraceRecord::Event { event, .. } => event.seq,
        }
    }
}

pub fn write_trace<W: Write>(out: W, records: &[TraceRecord]) -> io::Result<()> {
    let mut out = BufWriter::new(out);
    for r in records {
        serde_json::to_writer(&mut out, r)?;
        out.write_all(b"\n")?;
    }
    out.flush()
}

pub fn write_trace_file(path: &Path, records: &[TraceRecord]) -> io::Result<()> {
    write_trace(File::create(path)?, records)
}

pub fn read_trace<R: io::Read>(input: R) -> io::Result<Vec<TraceRecord>> {
    let mut out = Vec::new();
    for line in BufReader::new(input).lines() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        out.push(serde_json::from_str(&line).map_err(io::Error::other)?);
    }
    Ok(out)
}

pub fn read_trace_file(path: &Path) -> io::Result<Vec<TraceRecord>> {
    read_trace(File::open(path)?)
}
