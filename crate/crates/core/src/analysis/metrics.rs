use super::{AnalysisError, LoadedProfile, ProfileSet};
use crate::model::{RankId, RunProfile};
use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::path::PathBuf;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Metric {
    BytesPerSec,
    MsgsPerSec,
    TimePerRank,
    BytesPerLevel,
    SrcRanksPerLevel,
}

impl Metric {
    pub const ALL: [Metric; 5] = [
        Metric::BytesPerSec,
        Metric::MsgsPerSec,
        Metric::TimePerRank,
        Metric::BytesPerLevel,
        Metric::SrcRanksPerLevel,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Metric::BytesPerSec => "bytes-per-sec",
            Metric::MsgsPerSec => "msgs-per-sec",
            Metric::TimePerRank => "time-per-rank",
            Metric::BytesPerLevel => "bytes-per-level",
            Metric::SrcRanksPerLevel => "src-ranks-per-level",
        }
    }

    pub fn unit(self) -> &'static str {
        match self {
            Metric::BytesPerSec => "bytes/s/process",
            Metric::MsgsPerSec => "msgs/s/process",
            Metric::TimePerRank => "s/rank",
            Metric::BytesPerLevel => "bytes",
            Metric::SrcRanksPerLevel => "ranks",
        }
    }
}

impl std::str::FromStr for Metric {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Metric::ALL
            .into_iter()
            .find(|m| m.as_str() == s)
            .ok_or_else(|| format!("unknown metric {s:?}"))
    }
}

impl fmt::Display for Metric {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Which ranks a per-level source-rank average is taken over.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum SrcAveraging {
    /// Ranks that received at least one message at the level.
    #[default]
    Receiving,
    /// Every rank with a record at the level.
    AllRanks,
}

/// One table value with the raw quantities it was derived from.
#[derive(Debug, Clone, PartialEq)]
pub struct Cell {
    /// Full precision; rendering rounds to nine significant digits.
    pub value: f64,
    /// Summed counter the value is normalised from.
    pub raw: f64,
    /// `value` is `raw / divisor`; a zero divisor yields 0.
    pub divisor: f64,
    /// Region keys whose counters fed `raw`.
    pub sources: Vec<String>,
}

impl Cell {
    fn ratio(raw: f64, divisor: f64, sources: Vec<String>) -> Self {
        let value = if divisor == 0.0 { 0.0 } else { raw / divisor };
        Cell {
            value,
            raw,
            divisor,
            sources,
        }
    }
}

/// One profile's row.
#[derive(Debug, Clone, PartialEq)]
pub struct Row {
    pub nranks: u64,
    pub benchmark: String,
    pub source: PathBuf,
    pub elapsed_sec: f64,
    pub cells: Vec<Option<Cell>>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MetricTable {
    pub metric: Metric,
    pub columns: Vec<String>,
    pub rows: Vec<Row>,
}

impl MetricTable {
    pub fn column(&self, name: &str) -> Option<usize> {
        self.columns.iter().position(|c| c == name)
    }

    pub fn value(&self, row: usize, column: &str) -> Option<f64> {
        let c = self.column(column)?;
        self.rows.get(row)?.cells[c].as_ref().map(|cell| cell.value)
    }
}

impl fmt::Display for MetricTable {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "{} [{}]", self.metric, self.metric.unit())?;
        write!(f, "{:>8}", "nranks")?;
        for c in &self.columns {
            write!(f, " {c:>20}")?;
        }
        for r in &self.rows {
            write!(f, "\n{:>8}", r.nranks)?;
            for c in &r.cells {
                let v = c.as_ref().map_or("-".to_string(), |c| super::format_value(c.value));
                write!(f, " {v:>20}")?;
            }
        }
        Ok(())
    }
}

fn region_columns(set: &ProfileSet, regions: &[String]) -> Result<Vec<String>, AnalysisError> {
    if !regions.is_empty() {
        for p in set.profiles() {
            for r in regions {
                if p.profile.summary(r).is_none() {
                    return Err(AnalysisError::RegionAbsent {
                        region: r.clone(),
                        path: p.path.clone(),
                    });
                }
            }
        }
        return Ok(regions.to_vec());
    }
    let mut names: Vec<String> = Vec::new();
    for p in set.profiles() {
        for s in &p.profile.summaries {
            if !names.contains(&s.name) {
                names.push(s.name.clone());
            }
        }
    }
    Ok(names)
}

fn build<F>(set: &ProfileSet, metric: Metric, columns: Vec<String>, mut cell: F) -> Result<MetricTable, AnalysisError>
where
    F: FnMut(&LoadedProfile, &str) -> Result<Option<Cell>, AnalysisError>,
{
    let mut rows = Vec::with_capacity(set.len());
    for p in set.profiles() {
        let cells = columns
            .iter()
            .map(|c| cell(p, c))
            .collect::<Result<Vec<_>, _>>()?;
        rows.push(Row {
            nranks: p.profile.meta.nranks,
            benchmark: p.profile.meta.benchmark.clone(),
            source: p.path.clone(),
            elapsed_sec: p.profile.meta.elapsed_sec,
            cells,
        });
    }
    Ok(MetricTable {
        metric,
        columns,
        rows,
    })
}

/// How event counters are attributed to a region for rate metrics.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Rollup {
    /// Only events whose innermost region is the named one.
    #[default]
    Exclusive,
    /// Also events of every region nested inside it; needs per-rank records.
    Inclusive,
}

type Counters = (fn(&crate::RegionSummary) -> u64, fn(&crate::RegionCommStats) -> u64);

fn rate(
    set: &ProfileSet,
    regions: &[String],
    rollup: Rollup,
    metric: Metric,
    (summary_counter, record_counter): Counters,
) -> Result<MetricTable, AnalysisError> {
    let columns = region_columns(set, regions)?;
    build(set, metric, columns, |p, region| {
        let meta = &p.profile.meta;
        if meta.elapsed_sec == 0.0 {
            return Err(AnalysisError::ZeroElapsed { path: p.path.clone() });
        }
        let divisor = meta.elapsed_sec * meta.nranks as f64;
        match rollup {
            Rollup::Exclusive => {
                let fed: Vec<_> = p.profile.summaries_named(region).collect();
                if fed.is_empty() {
                    return Ok(None);
                }
                let raw: u64 = fed.iter().map(|s| summary_counter(s)).sum();
                let sources = fed.iter().map(|s| s.key().to_string()).collect();
                Ok(Some(Cell::ratio(raw as f64, divisor, sources)))
            }
            Rollup::Inclusive => {
                let records = p
                    .profile
                    .per_rank
                    .as_ref()
                    .ok_or_else(|| AnalysisError::MissingPerRank { path: p.path.clone() })?;
                let fed: Vec<_> = records
                    .iter()
                    .filter(|r| r.region.names.iter().any(|n| n == region))
                    .collect();
                if fed.is_empty() {
                    return Ok(None);
                }
                let raw: u64 = fed.iter().map(|r| record_counter(r)).sum();
                let mut sources: Vec<String> = Vec::new();
                for r in &fed {
                    let k = r.key().to_string();
                    if !sources.contains(&k) {
                        sources.push(k);
                    }
                }
                Ok(Some(Cell::ratio(raw as f64, divisor, sources)))
            }
        }
    })
}

/// Bytes sent per second per process: Σ bytes over the region / elapsed / nranks.
pub fn bytes_per_sec(set: &ProfileSet, regions: &[String], rollup: Rollup) -> Result<MetricTable, AnalysisError> {
    rate(set, regions, rollup, Metric::BytesPerSec, (|s| s.bytes_sent_sum, |r| r.bytes_sent_total))
}

/// Messages sent per second per process.
pub fn msgs_per_sec(set: &ProfileSet, regions: &[String], rollup: Rollup) -> Result<MetricTable, AnalysisError> {
    rate(set, regions, rollup, Metric::MsgsPerSec, (|s| s.sends_sum, |r| r.sends))
}

/// Mean inclusive time per rank spent in each region. Uses per-rank records
/// when the profile has them, otherwise the summaries' `time_avg`.
pub fn time_per_rank(set: &ProfileSet, regions: &[String]) -> Result<MetricTable, AnalysisError> {
    let columns = region_columns(set, regions)?;
    build(set, Metric::TimePerRank, columns, |p, region| {
        let fed: Vec<_> = p.profile.summaries_named(region).collect();
        if fed.is_empty() {
            return Ok(None);
        }
        let sources: Vec<String> = fed.iter().map(|s| s.key().to_string()).collect();
        let cell = match &p.profile.per_rank {
            Some(records) => {
                let mut per: BTreeMap<RankId, f64> = BTreeMap::new();
                for r in records.iter().filter(|r| r.region.innermost() == Some(region)) {
                    *per.entry(r.rank).or_default() += r.time_sec;
                }
                Cell::ratio(per.values().sum(), per.len() as f64, sources)
            }
            None => {
                let raw: f64 = fed.iter().map(|s| s.time_avg * s.ranks as f64).sum();
                let ranks = fed.iter().map(|s| s.ranks).max().unwrap_or(0);
                Cell::ratio(raw, ranks as f64, sources)
            }
        };
        Ok(Some(cell))
    })
}

fn level_of(labels: &crate::model::Labels) -> Option<u64> {
    labels.get("level")?.parse().ok()
}

fn level_columns(set: &ProfileSet, region: Option<&str>) -> Result<Vec<u64>, AnalysisError> {
    let levels: BTreeSet<u64> = set
        .profiles()
        .iter()
        .flat_map(|p| &p.profile.summaries)
        .filter(|s| region.is_none_or(|r| s.name == r))
        .filter_map(|s| level_of(&s.labels))
        .collect();
    if levels.is_empty() {
        return Err(AnalysisError::NoLevels);
    }
    Ok(levels.into_iter().collect())
}

fn level_name(l: u64) -> String {
    format!("level={l}")
}

fn level_index(columns: &[u64], name: &str) -> u64 {
    columns[columns.iter().position(|&l| level_name(l) == name).expect("known column")]
}

fn keep(profile: &RunProfile, region: Option<&str>, level: u64) -> Vec<String> {
    profile
        .summaries
        .iter()
        .filter(|s| region.is_none_or(|r| s.name == r) && level_of(&s.labels) == Some(level))
        .map(|s| s.key().to_string())
        .collect()
}

/// Bytes sent at each multigrid level, summed over ranks and level regions.
pub fn bytes_per_level(set: &ProfileSet, region: Option<&str>) -> Result<MetricTable, AnalysisError> {
    let levels = level_columns(set, region)?;
    let columns: Vec<String> = levels.iter().map(|&l| level_name(l)).collect();
    build(set, Metric::BytesPerLevel, columns, |p, col| {
        let level = level_index(&levels, col);
        let fed = keep(&p.profile, region, level);
        if fed.is_empty() {
            return Ok(None);
        }
        let raw: u64 = p
            .profile
            .summaries
            .iter()
            .filter(|s| region.is_none_or(|r| s.name == r) && level_of(&s.labels) == Some(level))
            .map(|s| s.bytes_sent_sum)
            .sum();
        Ok(Some(Cell::ratio(raw as f64, 1.0, fed)))
    })
}

/// Mean over ranks of each rank's largest per-instance source-rank count at
/// a level.
pub fn src_ranks_per_level(
    set: &ProfileSet,
    region: Option<&str>,
    averaging: SrcAveraging,
) -> Result<MetricTable, AnalysisError> {
    let levels = level_columns(set, region)?;
    let columns: Vec<String> = levels.iter().map(|&l| level_name(l)).collect();
    build(set, Metric::SrcRanksPerLevel, columns, |p, col| {
        let level = level_index(&levels, col);
        let fed = keep(&p.profile, region, level);
        if fed.is_empty() {
            return Ok(None);
        }
        let records = p
            .profile
            .per_rank
            .as_ref()
            .ok_or_else(|| AnalysisError::MissingPerRank { path: p.path.clone() })?;
        // rank -> (largest src_ranks_max, total recvs)
        let mut per: BTreeMap<RankId, (u64, u64)> = BTreeMap::new();
        for r in records.iter().filter(|r| {
            region.is_none_or(|n| r.region.innermost() == Some(n)) && level_of(&r.region.labels) == Some(level)
        }) {
            let e = per.entry(r.rank).or_default();
            e.0 = e.0.max(r.src_ranks_max);
            e.1 += r.recvs;
        }
        let chosen: Vec<u64> = per
            .values()
            .filter(|(_, recvs)| averaging == SrcAveraging::AllRanks || *recvs > 0)
            .map(|(m, _)| *m)
            .collect();
        Ok(Some(Cell::ratio(
            chosen.iter().sum::<u64>() as f64,
            chosen.len() as f64,
            fed,
        )))
    })
}
