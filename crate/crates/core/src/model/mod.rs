//! Shared data types: message events, per-rank region statistics, cross-rank
//! summaries, run profiles and experiment descriptions.
//!
//! Everything here is a plain value. Behaviour beyond construction and
//! validation lives in the other modules.

mod canonical;
mod validate;

pub use canonical::{from_json_str, round_sig9, to_canonical_json};
pub use validate::{validate_profile, Violation};

use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use std::fmt;

/// Index of a rank within its run.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct RankId(pub u32);

impl RankId {
    pub fn index(self) -> usize {
        self.0 as usize
    }
}

impl From<usize> for RankId {
    fn from(value: usize) -> Self {
        RankId(value as u32)
    }
}

impl fmt::Display for RankId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

/// Labels attached to the innermost region at begin (e.g. `level -> "3"`).
pub type Labels = BTreeMap<String, String>;

/// Builds a label map from string pairs.
pub fn labels<I, K, V>(pairs: I) -> Labels
where
    I: IntoIterator<Item = (K, V)>,
    K: Into<String>,
    V: Into<String>,
{
    pairs
        .into_iter()
        .map(|(k, v)| (k.into(), v.into()))
        .collect()
}

/// Stack of open region names (outermost first) plus the innermost labels.
#[derive(Clone, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct RegionPath {
    pub names: Vec<String>,
    #[serde(default)]
    pub labels: Labels,
}

impl RegionPath {
    pub fn innermost(&self) -> Option<&str> {
        self.names.last().map(String::as_str)
    }

    pub fn is_empty(&self) -> bool {
        self.names.is_empty()
    }
}

/// Identity of a region for aggregation: innermost name plus labels.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct RegionKey {
    pub name: String,
    pub labels: Labels,
}

impl RegionKey {
    pub fn new(name: impl Into<String>, labels: Labels) -> Self {
        RegionKey {
            name: name.into(),
            labels,
        }
    }
}

impl fmt::Display for RegionKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.name)?;
        if !self.labels.is_empty() {
            let parts: Vec<String> = self
                .labels
                .iter()
                .map(|(k, v)| format!("{k}={v}"))
                .collect();
            write!(f, "{{{}}}", parts.join(","))?;
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EventKind {
    Send,
    Recv,
    Collective,
}

/// Peer of an event: a concrete rank, or every rank for rootless collectives.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Peer {
    Rank(RankId),
    All,
}

impl Serialize for Peer {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        match self {
            Peer::Rank(r) => s.serialize_u32(r.0),
            Peer::All => s.serialize_str("all"),
        }
    }
}

impl<'de> Deserialize<'de> for Peer {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Raw {
            Rank(u32),
            Word(String),
        }
        match Raw::deserialize(d)? {
            Raw::Rank(r) => Ok(Peer::Rank(RankId(r))),
            Raw::Word(w) if w == "all" => Ok(Peer::All),
            Raw::Word(w) => Err(serde::de::Error::custom(format!(
                "expected rank index or \"all\", got {w:?}"
            ))),
        }
    }
}

/// One point-to-point or collective occurrence observed on a rank.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct MessageEvent {
    pub seq: u64,
    pub kind: EventKind,
    pub src: RankId,
    pub dst: Peer,
    pub bytes: u64,
    pub region: RegionPath,
    pub op: String,
}

/// Scaling discipline of an experiment series.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Scaling {
    Weak,
    Strong,
}

impl fmt::Display for Scaling {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Scaling::Weak => "weak",
            Scaling::Strong => "strong",
        })
    }
}

/// Per-rank tallies for one region, folded over all of its instances.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RegionCommStats {
    pub rank: RankId,
    pub region: RegionPath,
    pub instances: u64,
    pub sends: u64,
    pub recvs: u64,
    pub bytes_sent_total: u64,
    pub bytes_recv_total: u64,
    pub msg_sent_min: u64,
    pub msg_sent_max: u64,
    pub msg_recv_min: u64,
    pub msg_recv_max: u64,
    pub dest_ranks_max: u64,
    pub dest_ranks_min: u64,
    pub src_ranks_max: u64,
    pub src_ranks_min: u64,
    pub colls: u64,
    #[serde(serialize_with = "canonical::ser_f64")]
    pub time_sec: f64,
}

impl RegionCommStats {
    pub fn key(&self) -> RegionKey {
        RegionKey::new(
            self.region.innermost().unwrap_or_default(),
            self.region.labels.clone(),
        )
    }
}

/// Cross-rank extrema of one attribute.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct MinMax {
    pub min: u64,
    pub max: u64,
}

impl MinMax {
    pub fn of(values: impl IntoIterator<Item = u64>) -> Self {
        let mut it = values.into_iter();
        let Some(first) = it.next() else {
            return MinMax::default();
        };
        it.fold(MinMax { min: first, max: first }, |acc, v| MinMax {
            min: acc.min.min(v),
            max: acc.max.max(v),
        })
    }
}

/// Cross-rank reduction of [`RegionCommStats`] for one region name and label set.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RegionSummary {
    pub name: String,
    #[serde(default)]
    pub labels: Labels,
    /// Number of ranks that entered the region at least once.
    pub ranks: u64,
    pub instances: MinMax,
    pub sends: MinMax,
    pub recvs: MinMax,
    pub bytes_sent_total: MinMax,
    pub bytes_recv_total: MinMax,
    pub msg_sent_min: MinMax,
    pub msg_sent_max: MinMax,
    pub msg_recv_min: MinMax,
    pub msg_recv_max: MinMax,
    pub dest_ranks_max: MinMax,
    pub dest_ranks_min: MinMax,
    pub src_ranks_max: MinMax,
    pub src_ranks_min: MinMax,
    pub colls: MinMax,
    pub sends_sum: u64,
    pub recvs_sum: u64,
    pub bytes_sent_sum: u64,
    pub bytes_recv_sum: u64,
    pub colls_sum: u64,
    #[serde(serialize_with = "canonical::ser_f64")]
    pub avg_send_size: f64,
    #[serde(serialize_with = "canonical::ser_f64")]
    pub time_avg: f64,
    #[serde(serialize_with = "canonical::ser_f64")]
    pub time_min: f64,
    #[serde(serialize_with = "canonical::ser_f64")]
    pub time_max: f64,
}

impl RegionSummary {
    pub fn key(&self) -> RegionKey {
        RegionKey::new(self.name.clone(), self.labels.clone())
    }

    /// Largest single message any rank sent in the region.
    pub fn largest_send(&self) -> u64 {
        self.msg_sent_max.max
    }

    /// Fewest distinct destinations seen by any rank in any instance.
    pub fn dest_ranks_floor(&self) -> u64 {
        self.dest_ranks_min.min
    }

    /// Most distinct destinations seen by any rank in any instance.
    pub fn dest_ranks_ceiling(&self) -> u64 {
        self.dest_ranks_max.max
    }

    pub fn src_ranks_floor(&self) -> u64 {
        self.src_ranks_min.min
    }

    pub fn src_ranks_ceiling(&self) -> u64 {
        self.src_ranks_max.max
    }
}

/// Execution mode a profile was recorded under.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ExecMode {
    /// Single-threaded cooperative schedule with a logical clock.
    Deterministic,
    /// One OS thread per rank with wall-clock timing.
    Concurrent,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunMeta {
    pub benchmark: String,
    pub scaling: Scaling,
    pub nranks: u64,
    pub grid: [u64; 3],
    /// Per-rank cells for weak scaling, global cells for strong scaling.
    pub problem: [u64; 3],
    #[serde(default)]
    pub kernel_params: BTreeMap<String, u64>,
    pub seed: u64,
    pub mode: ExecMode,
    #[serde(serialize_with = "canonical::ser_f64")]
    pub elapsed_sec: f64,
}

/// The on-disk unit: one run's metadata and its region summaries.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunProfile {
    pub meta: RunMeta,
    pub summaries: Vec<RegionSummary>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub per_rank: Option<Vec<RegionCommStats>>,
}

impl RunProfile {
    pub fn summaries_named<'a>(&'a self, name: &'a str) -> impl Iterator<Item = &'a RegionSummary> {
        self.summaries.iter().filter(move |s| s.name == name)
    }

    pub fn summary(&self, name: &str) -> Option<&RegionSummary> {
        self.summaries.iter().find(|s| s.name == name)
    }
}

/// Benchmarks bundled with the runner.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Benchmark {
    Halo3d,
    Sweep,
    AmgVcycle,
    LagStep,
}

impl Benchmark {
    pub fn as_str(self) -> &'static str {
        match self {
            Benchmark::Halo3d => "halo3d",
            Benchmark::Sweep => "sweep",
            Benchmark::AmgVcycle => "amg_vcycle",
            Benchmark::LagStep => "lag_step",
        }
    }
}

impl fmt::Display for Benchmark {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for Benchmark {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "halo3d" => Ok(Benchmark::Halo3d),
            "sweep" => Ok(Benchmark::Sweep),
            "amg_vcycle" => Ok(Benchmark::AmgVcycle),
            "lag_step" => Ok(Benchmark::LagStep),
            other => Err(format!("unknown benchmark {other:?}")),
        }
    }
}

/// Optional kernel knobs in an experiment file; unset entries take defaults.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct KernelParamSpec {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub fields_per_cell: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub element_bytes: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub msgs_per_neighbor: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub coarsen_min: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub max_levels: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub timesteps: Option<u64>,
}

/// Declarative description of a scaling series.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentSpec {
    pub benchmark: String,
    pub scaling: Scaling,
    pub grids: Vec<[u64; 3]>,
    pub base_problem: [u64; 3],
    #[serde(default = "default_iterations")]
    pub iterations: u64,
    #[serde(default)]
    pub kernel_params: KernelParamSpec,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_output_dir")]
    pub output_dir: String,
}

fn default_iterations() -> u64 {
    1
}

fn default_output_dir() -> String {
    "profiles".to_string()
}
