//! Loading profile sets and deriving per-process, per-region and per-level
//! metrics from them.

mod metrics;
mod output;

pub use metrics::{
    bytes_per_level, bytes_per_sec, msgs_per_sec, src_ranks_per_level, time_per_rank, Cell,
    Metric, MetricTable, Rollup, Row, SrcAveraging,
};
pub use output::{emit_csv, emit_svg, format_value, to_csv, to_svg};

use crate::model::{from_json_str, validate_profile, RunProfile};
use std::collections::BTreeSet;
use std::fmt;
use std::path::{Path, PathBuf};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum AnalysisError {
    #[error("no profiles matched {0}")]
    NoMatch(String),
    #[error("bad pattern {pattern}: {message}")]
    Pattern { pattern: String, message: String },
    #[error("no valid profiles among {0} matched files")]
    NoValidProfiles(usize),
    #[error("profiles mix benchmarks {0:?}; pass --allow-mixed to combine them")]
    MixedBenchmarks(Vec<String>),
    #[error("region {region:?} is absent from {path}")]
    RegionAbsent { region: String, path: PathBuf },
    #[error("{path}: elapsed_sec is 0, rate metrics are undefined")]
    ZeroElapsed { path: PathBuf },
    #[error("no region carries a level label")]
    NoLevels,
    #[error("{path}: per-rank records are required (rerun with --per-rank)")]
    MissingPerRank { path: PathBuf },
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

/// A profile together with the file it came from.
#[derive(Debug, Clone)]
pub struct LoadedProfile {
    pub path: PathBuf,
    pub profile: RunProfile,
}

/// A file that failed to parse or validate.
#[derive(Debug, Clone)]
pub struct Rejection {
    pub path: PathBuf,
    pub reasons: Vec<String>,
}

impl fmt::Display for Rejection {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: rejected", self.path.display())?;
        for r in &self.reasons {
            write!(f, "\n  {r}")?;
        }
        Ok(())
    }
}

/// Validated profiles ordered by rank count, then path.
#[derive(Debug, Clone)]
pub struct ProfileSet {
    profiles: Vec<LoadedProfile>,
}

impl ProfileSet {
    /// Builds a set from in-memory profiles, enforcing the single-benchmark rule.
    pub fn new(mut profiles: Vec<LoadedProfile>, allow_mixed: bool) -> Result<Self, AnalysisError> {
        let names: BTreeSet<&str> = profiles.iter().map(|p| p.profile.meta.benchmark.as_str()).collect();
        if names.len() > 1 && !allow_mixed {
            return Err(AnalysisError::MixedBenchmarks(
                names.into_iter().map(String::from).collect(),
            ));
        }
        profiles.sort_by(|a, b| {
            (a.profile.meta.nranks, &a.path).cmp(&(b.profile.meta.nranks, &b.path))
        });
        Ok(ProfileSet { profiles })
    }

    pub fn profiles(&self) -> &[LoadedProfile] {
        &self.profiles
    }

    pub fn len(&self) -> usize {
        self.profiles.len()
    }

    pub fn is_empty(&self) -> bool {
        self.profiles.is_empty()
    }

    pub fn nranks(&self) -> Vec<u64> {
        self.profiles.iter().map(|p| p.profile.meta.nranks).collect()
    }
}

/// Loaded set plus the files that were turned away.
#[derive(Debug)]
pub struct Loaded {
    pub set: ProfileSet,
    pub rejected: Vec<Rejection>,
}

/// Expands a directory (all `*.commprof.json` inside) or a glob pattern.
pub fn resolve_inputs(input: &str) -> Result<Vec<PathBuf>, AnalysisError> {
    let dir = Path::new(input);
    let pattern = if dir.is_dir() {
        dir.join("*.commprof.json").to_string_lossy().into_owned()
    } else {
        input.to_string()
    };
    let entries = glob::glob(&pattern).map_err(|e| AnalysisError::Pattern {
        pattern: pattern.clone(),
        message: e.to_string(),
    })?;
    let mut paths: Vec<PathBuf> = entries.filter_map(Result::ok).filter(|p| p.is_file()).collect();
    paths.sort();
    if paths.is_empty() {
        return Err(AnalysisError::NoMatch(input.to_string()));
    }
    Ok(paths)
}

fn load_one(path: &Path) -> Result<RunProfile, Vec<String>> {
    let text = std::fs::read_to_string(path).map_err(|e| vec![e.to_string()])?;
    let profile: RunProfile = from_json_str(&text).map_err(|e| vec![format!("parse error: {e}")])?;
    let violations = validate_profile(&profile);
    if violations.is_empty() {
        Ok(profile)
    } else {
        Err(violations.iter().map(ToString::to_string).collect())
    }
}

/// Loads, validates and groups profiles from a directory or glob.
pub fn load_profiles(input: &str, allow_mixed: bool) -> Result<Loaded, AnalysisError> {
    load_paths(&resolve_inputs(input)?, allow_mixed)
}

pub fn load_paths(paths: &[PathBuf], allow_mixed: bool) -> Result<Loaded, AnalysisError> {
    let mut ok = Vec::new();
    let mut rejected = Vec::new();
    for path in paths {
        match load_one(path) {
            Ok(profile) => ok.push(LoadedProfile {
                path: path.clone(),
                profile,
            }),
            Err(reasons) => rejected.push(Rejection {
                path: path.clone(),
                reasons,
            }),
        }
    }
    if ok.is_empty() {
        return Err(AnalysisError::NoValidProfiles(paths.len()));
    }
    Ok(Loaded {
        set: ProfileSet::new(ok, allow_mixed)?,
        rejected,
    })
}
