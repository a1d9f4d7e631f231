use super::{MinMax, RegionCommStats, RegionKey, RegionSummary, RunProfile};
use crate::profiler::summarize;
use std::collections::{HashMap, HashSet};
use std::fmt;

/// One broken invariant: where it was found and which rule it breaks.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Violation {
    pub location: String,
    pub message: String,
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {}", self.location, self.message)
    }
}

struct Collector {
    out: Vec<Violation>,
}

impl Collector {
    fn check(&mut self, ok: bool, location: &str, message: impl Into<String>) {
        if !ok {
            self.out.push(Violation {
                location: location.to_string(),
                message: message.into(),
            });
        }
    }
}

/// Checks every profile invariant; an empty list means the profile is coherent.
pub fn validate_profile(profile: &RunProfile) -> Vec<Violation> {
    let mut c = Collector { out: Vec::new() };
    let meta = &profile.meta;
    let nranks = meta.nranks;

    c.check(
        meta.grid.iter().all(|&d| d >= 1),
        "meta.grid",
        "grid dimension is zero",
    );
    c.check(
        meta.grid.iter().product::<u64>() == nranks,
        "meta.nranks",
        "nranks does not equal the grid product",
    );
    c.check(
        meta.elapsed_sec.is_finite() && meta.elapsed_sec >= 0.0,
        "meta.elapsed_sec",
        "elapsed_sec is negative or not finite",
    );

    if let Some(per_rank) = &profile.per_rank {
        let mut seen = HashSet::new();
        for (i, rec) in per_rank.iter().enumerate() {
            let loc = format!("per_rank[{i}] (rank {}, {})", rec.rank, rec.key());
            check_record(&mut c, rec, nranks, &loc);
            c.check(
                seen.insert((rec.rank, rec.key())),
                &loc,
                "duplicate per-rank record",
            );
        }
    }

    let mut keys = HashSet::new();
    for s in &profile.summaries {
        let loc = format!("summary {}", s.key());
        check_summary(&mut c, s, nranks, &loc);
        c.check(keys.insert(s.key()), &loc, "duplicate summary");
    }

    if let Some(per_rank) = &profile.per_rank {
        check_coherence(&mut c, &profile.summaries, per_rank);
    }
    c.out
}

fn check_record(c: &mut Collector, r: &RegionCommStats, nranks: u64, loc: &str) {
    c.check(u64::from(r.rank.0) < nranks, loc, "rank out of range");
    c.check(!r.region.names.is_empty(), loc, "region path is empty");
    c.check(r.instances >= 1, loc, "instances is zero");
    if r.sends == 0 {
        c.check(
            r.msg_sent_min == 0 && r.msg_sent_max == 0,
            loc,
            "message extrema nonzero without sends",
        );
        c.check(r.bytes_sent_total == 0, loc, "bytes_sent_total nonzero without sends");
    } else {
        c.check(r.msg_sent_min <= r.msg_sent_max, loc, "msg_sent_min exceeds msg_sent_max");
        c.check(
            r.msg_sent_max <= r.bytes_sent_total,
            loc,
            "msg_sent_max exceeds bytes_sent_total",
        );
    }
    if r.recvs == 0 {
        c.check(
            r.msg_recv_min == 0 && r.msg_recv_max == 0,
            loc,
            "message extrema nonzero without recvs",
        );
        c.check(r.bytes_recv_total == 0, loc, "bytes_recv_total nonzero without recvs");
    } else {
        c.check(r.msg_recv_min <= r.msg_recv_max, loc, "msg_recv_min exceeds msg_recv_max");
        c.check(
            r.msg_recv_max <= r.bytes_recv_total,
            loc,
            "msg_recv_max exceeds bytes_recv_total",
        );
    }
    let peers = nranks.saturating_sub(1);
    c.check(r.dest_ranks_min <= r.dest_ranks_max, loc, "dest_ranks_min exceeds dest_ranks_max");
    c.check(r.dest_ranks_max <= peers, loc, "dest_ranks_max exceeds nranks-1");
    c.check(r.src_ranks_min <= r.src_ranks_max, loc, "src_ranks_min exceeds src_ranks_max");
    c.check(r.src_ranks_max <= peers, loc, "src_ranks_max exceeds nranks-1");
    c.check(
        r.time_sec.is_finite() && r.time_sec >= 0.0,
        loc,
        "time_sec is negative or not finite",
    );
}

fn check_summary(c: &mut Collector, s: &RegionSummary, nranks: u64, loc: &str) {
    let attrs: [(&str, &MinMax); 14] = [
        ("instances", &s.instances),
        ("sends", &s.sends),
        ("recvs", &s.recvs),
        ("bytes_sent_total", &s.bytes_sent_total),
        ("bytes_recv_total", &s.bytes_recv_total),
        ("msg_sent_min", &s.msg_sent_min),
        ("msg_sent_max", &s.msg_sent_max),
        ("msg_recv_min", &s.msg_recv_min),
        ("msg_recv_max", &s.msg_recv_max),
        ("dest_ranks_max", &s.dest_ranks_max),
        ("dest_ranks_min", &s.dest_ranks_min),
        ("src_ranks_max", &s.src_ranks_max),
        ("src_ranks_min", &s.src_ranks_min),
        ("colls", &s.colls),
    ];
    for (name, mm) in attrs {
        c.check(mm.min <= mm.max, loc, format!("{name} min exceeds max"));
    }
    c.check(!s.name.is_empty(), loc, "region name is empty");
    c.check(s.ranks >= 1 && s.ranks <= nranks, loc, "ranks outside 1..=nranks");

    let in_sum_range = |sum: u64, mm: &MinMax| {
        let n = u128::from(s.ranks);
        let sum = u128::from(sum);
        sum >= n * u128::from(mm.min) && sum >= u128::from(mm.max)
    };
    c.check(in_sum_range(s.sends_sum, &s.sends), loc, "sends_sum inconsistent with sends extrema");
    c.check(in_sum_range(s.recvs_sum, &s.recvs), loc, "recvs_sum inconsistent with recvs extrema");
    c.check(
        in_sum_range(s.bytes_sent_sum, &s.bytes_sent_total),
        loc,
        "bytes_sent_sum inconsistent with bytes_sent_total extrema",
    );
    c.check(
        in_sum_range(s.bytes_recv_sum, &s.bytes_recv_total),
        loc,
        "bytes_recv_sum inconsistent with bytes_recv_total extrema",
    );
    c.check(in_sum_range(s.colls_sum, &s.colls), loc, "colls_sum inconsistent with colls extrema");

    if s.sends_sum == 0 {
        c.check(s.bytes_sent_sum == 0, loc, "bytes_sent_sum nonzero without sends");
        c.check(s.msg_sent_max.max == 0, loc, "message extrema nonzero without sends");
    } else {
        c.check(
            s.msg_sent_max.max <= s.bytes_sent_total.max,
            loc,
            "msg_sent_max exceeds bytes_sent_total",
        );
    }
    if s.recvs_sum == 0 {
        c.check(s.bytes_recv_sum == 0, loc, "bytes_recv_sum nonzero without recvs");
        c.check(s.msg_recv_max.max == 0, loc, "message extrema nonzero without recvs");
    } else {
        c.check(
            s.msg_recv_max.max <= s.bytes_recv_total.max,
            loc,
            "msg_recv_max exceeds bytes_recv_total",
        );
    }
    let peers = nranks.saturating_sub(1);
    c.check(s.dest_ranks_max.max <= peers, loc, "dest_ranks_max exceeds nranks-1");
    c.check(s.src_ranks_max.max <= peers, loc, "src_ranks_max exceeds nranks-1");

    let expected_avg = crate::profiler::average_send_size(s.bytes_sent_sum, s.sends_sum);
    c.check(
        s.avg_send_size == expected_avg,
        loc,
        "avg_send_size does not equal bytes_sent_sum / sends_sum",
    );
    c.check(
        s.time_min >= 0.0 && s.time_min <= s.time_avg && s.time_avg <= s.time_max,
        loc,
        "time_avg outside [time_min, time_max]",
    );
}

fn check_coherence(c: &mut Collector, stored: &[RegionSummary], per_rank: &[RegionCommStats]) {
    let fresh_list = summarize(per_rank);
    let recomputed: HashMap<RegionKey, &RegionSummary> =
        fresh_list.iter().map(|s| (s.key(), s)).collect();
    let mut covered = HashSet::new();
    for s in stored {
        let key = s.key();
        let loc = format!("summary {key}");
        let Some(fresh) = recomputed.get(&key) else {
            c.check(false, &loc, "summary has no per-rank records");
            continue;
        };
        covered.insert(key);
        let (a, b) = match (serde_json::to_value(s), serde_json::to_value(fresh)) {
            (Ok(serde_json::Value::Object(a)), Ok(serde_json::Value::Object(b))) => (a, b),
            _ => continue,
        };
        for (field, stored_value) in &a {
            let fresh_value = &b[field];
            c.check(
                stored_value == fresh_value,
                &loc,
                format!("{field} stored {stored_value} but per-rank records give {fresh_value}"),
            );
        }
    }
    for key in fresh_list.iter().map(RegionSummary::key) {
        if !covered.contains(&key) {
            c.check(
                false,
                &format!("per_rank {key}"),
                "per-rank records have no summary",
            );
        }
    }
}
