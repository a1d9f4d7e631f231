//! Communication-region markers and the pattern profiler.
//!
//! A [`RegionTracker`] lives on each rank. `begin`/`end` bracket one region
//! instance; every message event observed while the region is innermost is
//! tallied into that instance. At `end` the instance snapshot (counts, bytes,
//! per-message extrema, distinct peer cardinalities, collectives, inclusive
//! time) is folded into the rank's running [`RegionCommStats`] for the region.
//! [`summarize`] reduces the per-rank records across ranks.

use crate::model::{
    round_sig9, EventKind, Labels, MessageEvent, MinMax, Peer, RankId, RegionCommStats, RegionKey,
    RegionPath, RegionSummary,
};
use std::collections::{BTreeSet, HashMap};
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ProfilerError {
    #[error("region name must be non-empty")]
    EmptyName,
    #[error("rank {rank}: end of region {requested:?} while {open:?} is the innermost open region")]
    EndMismatch {
        rank: RankId,
        open: String,
        requested: String,
    },
    #[error("rank {rank}: end of region {requested:?} without a matching begin")]
    EndWithoutBegin { rank: RankId, requested: String },
    #[error("rank {rank}: region {region:?} still open at finalize")]
    Unclosed { rank: RankId, region: String },
}

#[derive(Debug, Default)]
struct Extrema {
    min: Option<u64>,
    max: u64,
}

impl Extrema {
    fn add(&mut self, v: u64) {
        self.min = Some(self.min.map_or(v, |m| m.min(v)));
        self.max = self.max.max(v);
    }

    fn merge(&mut self, other: &Extrema) {
        if let Some(m) = other.min {
            self.add(m);
            self.max = self.max.max(other.max);
        }
    }

    fn min_or_zero(&self) -> u64 {
        self.min.unwrap_or(0)
    }
}

#[derive(Debug, Default)]
struct InstanceTally {
    sends: u64,
    recvs: u64,
    bytes_sent: u64,
    bytes_recv: u64,
    sent: Extrema,
    recv: Extrema,
    dests: BTreeSet<RankId>,
    srcs: BTreeSet<RankId>,
    colls: u64,
}

#[derive(Debug)]
struct OpenRegion {
    key: RegionKey,
    path: RegionPath,
    begin_ns: u64,
    tally: InstanceTally,
}

#[derive(Debug)]
struct Accum {
    path: RegionPath,
    instances: u64,
    sends: u64,
    recvs: u64,
    bytes_sent: u64,
    bytes_recv: u64,
    sent: Extrema,
    recv: Extrema,
    dest_card: Extrema,
    src_card: Extrema,
    colls: u64,
    time_ns: u64,
}

impl Accum {
    fn new(path: RegionPath) -> Self {
        Accum {
            path,
            instances: 0,
            sends: 0,
            recvs: 0,
            bytes_sent: 0,
            bytes_recv: 0,
            sent: Extrema::default(),
            recv: Extrema::default(),
            dest_card: Extrema::default(),
            src_card: Extrema::default(),
            colls: 0,
            time_ns: 0,
        }
    }

    fn fold(&mut self, t: &InstanceTally, elapsed_ns: u64) {
        self.instances += 1;
        self.sends += t.sends;
        self.recvs += t.recvs;
        self.bytes_sent += t.bytes_sent;
        self.bytes_recv += t.bytes_recv;
        self.sent.merge(&t.sent);
        self.recv.merge(&t.recv);
        self.dest_card.add(t.dests.len() as u64);
        self.src_card.add(t.srcs.len() as u64);
        self.colls += t.colls;
        self.time_ns += elapsed_ns;
    }
}

/// Rank-local region stack and per-region accumulators.
#[derive(Debug)]
pub struct RegionTracker {
    rank: RankId,
    stack: Vec<OpenRegion>,
    records: Vec<Accum>,
    index: HashMap<RegionKey, usize>,
}

/// Converts accumulated nanoseconds into the seconds value stored in profiles.
pub fn ns_to_sec(ns: u64) -> f64 {
    round_sig9(ns as f64 * 1e-9)
}

/// `bytes / sends`, or 0 when nothing was sent.
pub fn average_send_size(bytes_sent_sum: u64, sends_sum: u64) -> f64 {
    if sends_sum == 0 {
        0.0
    } else {
        round_sig9(bytes_sent_sum as f64 / sends_sum as f64)
    }
}

impl RegionTracker {
    pub fn new(rank: RankId) -> Self {
        RegionTracker {
            rank,
            stack: Vec::new(),
            records: Vec::new(),
            index: HashMap::new(),
        }
    }

    pub fn rank(&self) -> RankId {
        self.rank
    }

    pub fn depth(&self) -> usize {
        self.stack.len()
    }

    /// Path of the innermost open region; empty when no region is open.
    pub fn current_path(&self) -> RegionPath {
        self.stack
            .last()
            .map(|r| r.path.clone())
            .unwrap_or_default()
    }

    pub fn begin(&mut self, name: &str, labels: Labels, now_ns: u64) -> Result<(), ProfilerError> {
        if name.is_empty() {
            return Err(ProfilerError::EmptyName);
        }
        let mut names: Vec<String> = self
            .stack
            .last()
            .map(|r| r.path.names.clone())
            .unwrap_or_default();
        names.push(name.to_string());
        let path = RegionPath {
            names,
            labels: labels.clone(),
        };
        let key = RegionKey::new(name, labels);
        if !self.index.contains_key(&key) {
            self.index.insert(key.clone(), self.records.len());
            self.records.push(Accum::new(path.clone()));
        }
        self.stack.push(OpenRegion {
            key,
            path,
            begin_ns: now_ns,
            tally: InstanceTally::default(),
        });
        Ok(())
    }

    pub fn end(&mut self, name: &str, now_ns: u64) -> Result<(), ProfilerError> {
        match self.stack.last() {
            None => {
                return Err(ProfilerError::EndWithoutBegin {
                    rank: self.rank,
                    requested: name.to_string(),
                })
            }
            Some(open) if open.key.name != name => {
                return Err(ProfilerError::EndMismatch {
                    rank: self.rank,
                    open: open.key.name.clone(),
                    requested: name.to_string(),
                })
            }
            Some(_) => {}
        }
        let open = self.stack.pop().expect("checked above");
        let slot = self.index[&open.key];
        self.records[slot].fold(&open.tally, now_ns.saturating_sub(open.begin_ns));
        Ok(())
    }

    /// Attributes one event to the innermost open region, if any.
    pub fn on_event(&mut self, event: &MessageEvent) {
        let Some(open) = self.stack.last_mut() else {
            return;
        };
        let t = &mut open.tally;
        match event.kind {
            EventKind::Send => {
                t.sends += 1;
                t.bytes_sent += event.bytes;
                t.sent.add(event.bytes);
                if let Peer::Rank(dst) = event.dst {
                    t.dests.insert(dst);
                }
            }
            EventKind::Recv => {
                t.recvs += 1;
                t.bytes_recv += event.bytes;
                t.recv.add(event.bytes);
                t.srcs.insert(event.src);
            }
            EventKind::Collective => t.colls += 1,
        }
    }

    /// Emits this rank's records in first-begin order.
    pub fn finish(self) -> Result<Vec<RegionCommStats>, ProfilerError> {
        if let Some(open) = self.stack.last() {
            return Err(ProfilerError::Unclosed {
                rank: self.rank,
                region: open.key.name.clone(),
            });
        }
        let rank = self.rank;
        Ok(self
            .records
            .into_iter()
            .map(|a| RegionCommStats {
                rank,
                region: a.path,
                instances: a.instances,
                sends: a.sends,
                recvs: a.recvs,
                bytes_sent_total: a.bytes_sent,
                bytes_recv_total: a.bytes_recv,
                msg_sent_min: a.sent.min_or_zero(),
                msg_sent_max: a.sent.max,
                msg_recv_min: a.recv.min_or_zero(),
                msg_recv_max: a.recv.max,
                dest_ranks_max: a.dest_card.max,
                dest_ranks_min: a.dest_card.min_or_zero(),
                src_ranks_max: a.src_card.max,
                src_ranks_min: a.src_card.min_or_zero(),
                colls: a.colls,
                time_sec: ns_to_sec(a.time_ns),
            })
            .collect())
    }
}

/// Finalizes every rank's tracker; records come out ranks ascending.
pub fn finalize(trackers: Vec<RegionTracker>) -> Result<Vec<RegionCommStats>, ProfilerError> {
    let mut trackers = trackers;
    trackers.sort_by_key(RegionTracker::rank);
    let mut out = Vec::new();
    for t in trackers {
        out.extend(t.finish()?);
    }
    Ok(out)
}

/// Reduces per-rank records across ranks, one summary per region key.
///
/// Summaries are ordered by first appearance when scanning `stats` in order.
pub fn summarize(stats: &[RegionCommStats]) -> Vec<RegionSummary> {
    let mut order: Vec<RegionKey> = Vec::new();
    let mut groups: HashMap<RegionKey, Vec<&RegionCommStats>> = HashMap::new();
    for s in stats {
        let key = s.key();
        groups
            .entry(key.clone())
            .or_insert_with(|| {
                order.push(key);
                Vec::new()
            })
            .push(s);
    }
    order
        .into_iter()
        .map(|key| {
            let g = &groups[&key];
            let mm = |f: fn(&RegionCommStats) -> u64| MinMax::of(g.iter().map(|s| f(s)));
            let sum = |f: fn(&RegionCommStats) -> u64| g.iter().map(|s| f(s)).sum::<u64>();
            let sends_sum = sum(|s| s.sends);
            let bytes_sent_sum = sum(|s| s.bytes_sent_total);
            let time_total: f64 = g.iter().map(|s| s.time_sec).sum();
            let time_min = g.iter().map(|s| s.time_sec).fold(f64::INFINITY, f64::min);
            let time_max = g.iter().map(|s| s.time_sec).fold(0.0, f64::max);
            RegionSummary {
                name: key.name,
                labels: key.labels,
                ranks: g.len() as u64,
                instances: mm(|s| s.instances),
                sends: mm(|s| s.sends),
                recvs: mm(|s| s.recvs),
                bytes_sent_total: mm(|s| s.bytes_sent_total),
                bytes_recv_total: mm(|s| s.bytes_recv_total),
                msg_sent_min: mm(|s| s.msg_sent_min),
                msg_sent_max: mm(|s| s.msg_sent_max),
                msg_recv_min: mm(|s| s.msg_recv_min),
                msg_recv_max: mm(|s| s.msg_recv_max),
                dest_ranks_max: mm(|s| s.dest_ranks_max),
                dest_ranks_min: mm(|s| s.dest_ranks_min),
                src_ranks_max: mm(|s| s.src_ranks_max),
                src_ranks_min: mm(|s| s.src_ranks_min),
                colls: mm(|s| s.colls),
                sends_sum,
                recvs_sum: sum(|s| s.recvs),
                bytes_sent_sum,
                bytes_recv_sum: sum(|s| s.bytes_recv_total),
                colls_sum: sum(|s| s.colls),
                avg_send_size: average_send_size(bytes_sent_sum, sends_sum),
                time_avg: round_sig9(time_total / g.len() as f64),
                time_min: round_sig9(time_min),
                time_max: round_sig9(time_max),
            }
        })
        .collect()
}
