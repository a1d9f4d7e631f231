//! Shared helpers for integration tests, including an independent replay of
//! the trace stream that recomputes every profile counter from scratch.

#![allow(dead_code)]

use commprof::model::{EventKind, Labels, MinMax, Peer, RegionPath};
use commprof::sim::TraceRecord;
use commprof::{RankId, RegionCommStats, RegionSummary};
use std::collections::{BTreeMap, BTreeSet};

fn sig9(x: f64) -> f64 {
    format!("{x:.8e}").parse().unwrap()
}

/// Everything observed during one region instance on one rank.
#[derive(Default)]
struct Instance {
    sent: Vec<u64>,
    recvd: Vec<u64>,
    dests: BTreeSet<u32>,
    srcs: BTreeSet<u32>,
    colls: u64,
    elapsed_ns: u64,
}

type Key = (u32, String, Labels);

struct Open {
    name: String,
    labels: Labels,
    names: Vec<String>,
    t_ns: u64,
    inst: Instance,
}

/// Rebuilds per-rank region records from begin/end markers and events.
pub fn replay(records: &[TraceRecord]) -> Vec<RegionCommStats> {
    let mut sorted: Vec<&TraceRecord> = records.iter().collect();
    sorted.sort_by_key(|r| (r.rank(), r.seq()));

    // (rank, name, labels) -> (path at first begin, instances)
    let mut order: Vec<Key> = Vec::new();
    let mut done: BTreeMap<Key, (Vec<String>, Vec<Instance>)> = BTreeMap::new();
    let mut stacks: BTreeMap<u32, Vec<Open>> = BTreeMap::new();

    for r in sorted {
        let rank = r.rank().0;
        let stack = stacks.entry(rank).or_default();
        match r {
            TraceRecord::Begin { name, labels, t_ns, .. } => {
                let mut names = stack.last().map(|o| o.names.clone()).unwrap_or_default();
                names.push(name.clone());
                let key = (rank, name.clone(), labels.clone());
                if let std::collections::btree_map::Entry::Vacant(e) = done.entry(key.clone()) {
                    order.push(key);
                    e.insert((names.clone(), Vec::new()));
                }
                stack.push(Open {
                    name: name.clone(),
                    labels: labels.clone(),
                    names,
                    t_ns: *t_ns,
                    inst: Instance::default(),
                });
            }
            TraceRecord::End { name, t_ns, .. } => {
                let mut open = stack.pop().expect("end without begin in trace");
                assert_eq!(&open.name, name, "mismatched end in trace");
                open.inst.elapsed_ns = t_ns - open.t_ns;
                done.get_mut(&(rank, open.name, open.labels))
                    .unwrap()
                    .1
                    .push(open.inst);
            }
            TraceRecord::Event { event, .. } => {
                let Some(open) = stack.last_mut() else { continue };
                assert_eq!(event.region.names, open.names, "event region disagrees with markers");
                let i = &mut open.inst;
                match event.kind {
                    EventKind::Send => {
                        i.sent.push(event.bytes);
                        if let Peer::Rank(d) = event.dst {
                            i.dests.insert(d.0);
                        }
                    }
                    EventKind::Recv => {
                        i.recvd.push(event.bytes);
                        i.srcs.insert(event.src.0);
                    }
                    EventKind::Collective => i.colls += 1,
                }
            }
        }
    }
    for (rank, s) in &stacks {
        assert!(s.is_empty(), "rank {rank} left regions open in trace");
    }

    let mut ranks: Vec<u32> = order.iter().map(|k| k.0).collect();
    ranks.sort_unstable();
    ranks.dedup();
    let mut out = Vec::new();
    for rank in ranks {
        for key in order.iter().filter(|k| k.0 == rank) {
            let (names, insts) = &done[key];
            let all_sent: Vec<u64> = insts.iter().flat_map(|i| i.sent.iter().copied()).collect();
            let all_recv: Vec<u64> = insts.iter().flat_map(|i| i.recvd.iter().copied()).collect();
            let dest_cards: Vec<u64> = insts.iter().map(|i| i.dests.len() as u64).collect();
            let src_cards: Vec<u64> = insts.iter().map(|i| i.srcs.len() as u64).collect();
            let min0 = |v: &[u64]| v.iter().copied().min().unwrap_or(0);
            let max0 = |v: &[u64]| v.iter().copied().max().unwrap_or(0);
            out.push(RegionCommStats {
                rank: RankId(rank),
                region: RegionPath {
                    names: names.clone(),
                    labels: key.2.clone(),
                },
                instances: insts.len() as u64,
                sends: all_sent.len() as u64,
                recvs: all_recv.len() as u64,
                bytes_sent_total: all_sent.iter().sum(),
                bytes_recv_total: all_recv.iter().sum(),
                msg_sent_min: min0(&all_sent),
                msg_sent_max: max0(&all_sent),
                msg_recv_min: min0(&all_recv),
                msg_recv_max: max0(&all_recv),
                dest_ranks_max: max0(&dest_cards),
                dest_ranks_min: min0(&dest_cards),
                src_ranks_max: max0(&src_cards),
                src_ranks_min: min0(&src_cards),
                colls: insts.iter().map(|i| i.colls).sum(),
                time_sec: sig9(insts.iter().map(|i| i.elapsed_ns).sum::<u64>() as f64 * 1e-9),
            });
        }
    }
    out
}

/// Cross-rank reduction written directly from the field definitions.
pub fn reduce(stats: &[RegionCommStats]) -> Vec<RegionSummary> {
    let mut keys: Vec<(String, Labels)> = Vec::new();
    for s in stats {
        let k = (s.region.names.last().unwrap().clone(), s.region.labels.clone());
        if !keys.contains(&k) {
            keys.push(k);
        }
    }
    keys.into_iter()
        .map(|(name, labels)| {
            let g: Vec<&RegionCommStats> = stats
                .iter()
                .filter(|s| s.region.names.last() == Some(&name) && s.region.labels == labels)
                .collect();
            let mm = |f: &dyn Fn(&RegionCommStats) -> u64| MinMax {
                min: g.iter().map(|s| f(s)).min().unwrap(),
                max: g.iter().map(|s| f(s)).max().unwrap(),
            };
            let total = |f: &dyn Fn(&RegionCommStats) -> u64| g.iter().map(|s| f(s)).sum::<u64>();
            let sends_sum = total(&|s| s.sends);
            let bytes_sent_sum = total(&|s| s.bytes_sent_total);
            let times: Vec<f64> = g.iter().map(|s| s.time_sec).collect();
            RegionSummary {
                name,
                labels,
                ranks: g.len() as u64,
                instances: mm(&|s| s.instances),
                sends: mm(&|s| s.sends),
                recvs: mm(&|s| s.recvs),
                bytes_sent_total: mm(&|s| s.bytes_sent_total),
                bytes_recv_total: mm(&|s| s.bytes_recv_total),
                msg_sent_min: mm(&|s| s.msg_sent_min),
                msg_sent_max: mm(&|s| s.msg_sent_max),
                msg_recv_min: mm(&|s| s.msg_recv_min),
                msg_recv_max: mm(&|s| s.msg_recv_max),
                dest_ranks_max: mm(&|s| s.dest_ranks_max),
                dest_ranks_min: mm(&|s| s.dest_ranks_min),
                src_ranks_max: mm(&|s| s.src_ranks_max),
                src_ranks_min: mm(&|s| s.src_ranks_min),
                colls: mm(&|s| s.colls),
                sends_sum,
                recvs_sum: total(&|s| s.recvs),
                bytes_sent_sum,
                bytes_recv_sum: total(&|s| s.bytes_recv_total),
                colls_sum: total(&|s| s.colls),
                avg_send_size: if sends_sum == 0 {
                    0.0
                } else {
                    sig9(bytes_sent_sum as f64 / sends_sum as f64)
                },
                time_avg: sig9(times.iter().sum::<f64>() / times.len() as f64),
                time_min: sig9(times.iter().copied().fold(f64::INFINITY, f64::min)),
                time_max: sig9(times.iter().copied().fold(0.0, f64::max)),
            }
        })
        .collect()
}

/// Message-level conservation over the whole trace.
pub struct Totals {
    pub sends: u64,
    pub recvs: u64,
    pub bytes_sent: u64,
    pub bytes_recv: u64,
    pub colls: u64,
}

pub fn totals(records: &[TraceRecord]) -> Totals {
    let mut t = Totals { sends: 0, recvs: 0, bytes_sent: 0, bytes_recv: 0, colls: 0 };
    for r in records {
        if let TraceRecord::Event { event, .. } = r {
            match event.kind {
                EventKind::Send => {
                    t.sends += 1;
                    t.bytes_sent += event.bytes;
                }
                EventKind::Recv => {
                    t.recvs += 1;
                    t.bytes_recv += event.bytes;
                }
                EventKind::Collective => t.colls += 1,
            }
        }
    }
    t
}
