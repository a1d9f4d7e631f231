//! Experiment driver: expands an [`ExperimentSpec`] into a scaling series,
//! runs every configuration and writes one canonical profile per run.
//!
//! Experiment files are JSON:
//!
//! ```json
//! {
//!   "benchmark": "halo3d",
//!   "scaling": "weak",
//!   "grids": [[4, 4, 4], [8, 4, 4]],
//!   "base_problem": [16, 32, 32],
//!   "kernel_params": { "fields_per_cell": 1 }
//! }
//! ```

use crate::kernels::{self, hierarchy, Grid3D, KernelError, KernelParams};
use crate::model::{
    to_canonical_json, Benchmark, ExecMode, ExperimentSpec, KernelParamSpec, RunMeta, RunProfile,
    Scaling,
};
use crate::sim::{trace, SimConfig, SimError, TraceRecord};
use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};
use thiserror::Error;

/// Largest simulated world a series may request without an override.
pub const DEFAULT_MAX_RANKS: u64 = 512;

#[derive(Debug, Error)]
pub enum RunnerError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}: {source}")]
    Parse {
        path: PathBuf,
        #[source]
        source: serde_json::Error,
    },
    #[error("unknown benchmark {0:?} (expected halo3d, sweep, amg_vcycle or lag_step)")]
    UnknownBenchmark(String),
    #[error("experiment lists no grids")]
    EmptyGrids,
    #[error("grid {grid:?} has a zero dimension")]
    ZeroGrid { grid: [u64; 3] },
    #[error("base_problem {0:?} has a zero dimension")]
    ZeroProblem([u64; 3]),
    #[error("grid {grid:?} needs {nranks} ranks, above the cap of {cap}")]
    TooManyRanks { grid: [u64; 3], nranks: u64, cap: u64 },
    #[error(transparent)]
    Kernel(#[from] KernelError),
    #[error(transparent)]
    Sim(#[from] SimError),
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> RunnerError + '_ {
    move |source| RunnerError::Io {
        path: path.to_path_buf(),
        source,
    }
}

/// Reads, validates and default-fills an experiment file.
pub fn load_experiment(path: impl AsRef<Path>) -> Result<ExperimentSpec, RunnerError> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(io_err(path))?;
    let spec: ExperimentSpec = serde_json::from_str(&text).map_err(|source| RunnerError::Parse {
        path: path.to_path_buf(),
        source,
    })?;
    prepare(spec)
}

/// Validates a spec and fills in every defaulted kernel parameter.
pub fn prepare(mut spec: ExperimentSpec) -> Result<ExperimentSpec, RunnerError> {
    benchmark_of(&spec)?;
    if spec.grids.is_empty() {
        return Err(RunnerError::EmptyGrids);
    }
    if let Some(&grid) = spec.grids.iter().find(|g| g.contains(&0)) {
        return Err(RunnerError::ZeroGrid { grid });
    }
    if spec.base_problem.contains(&0) {
        return Err(RunnerError::ZeroProblem(spec.base_problem));
    }
    let k = &mut spec.kernel_params;
    k.fields_per_cell.get_or_insert(KernelParams::DEFAULT_FIELDS_PER_CELL);
    k.element_bytes.get_or_insert(KernelParams::DEFAULT_ELEMENT_BYTES);
    k.msgs_per_neighbor.get_or_insert(KernelParams::DEFAULT_MSGS_PER_NEIGHBOR);
    k.coarsen_min.get_or_insert(KernelParams::DEFAULT_COARSEN_MIN);
    k.timesteps.get_or_insert(spec.iterations);
    for &grid in &spec.grids {
        plan_one(&spec, grid)?.params.validate()?;
    }
    Ok(spec)
}

fn benchmark_of(spec: &ExperimentSpec) -> Result<Benchmark, RunnerError> {
    spec.benchmark
        .parse()
        .map_err(|_| RunnerError::UnknownBenchmark(spec.benchmark.clone()))
}

/// One configuration of a series.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RunPlan {
    pub benchmark: Benchmark,
    pub scaling: Scaling,
    pub grid: [u64; 3],
    /// Value recorded as `meta.problem`.
    pub problem: [u64; 3],
    pub params: KernelParams,
}

impl RunPlan {
    pub fn nranks(&self) -> u64 {
        self.grid.iter().product()
    }

    pub fn file_stem(&self) -> String {
        let [x, y, z] = self.grid;
        format!("{}_{x}x{y}x{z}", self.benchmark)
    }
}

fn apply(params: &mut KernelParams, k: &KernelParamSpec) {
    let or = |v: Option<u64>, d: u64| v.unwrap_or(d);
    params.fields_per_cell = or(k.fields_per_cell, params.fields_per_cell);
    params.element_bytes = or(k.element_bytes, params.element_bytes);
    params.msgs_per_neighbor = or(k.msgs_per_neighbor, params.msgs_per_neighbor);
    params.coarsen_min = or(k.coarsen_min, params.coarsen_min);
    params.max_levels = k.max_levels;
}

fn plan_one(spec: &ExperimentSpec, grid: [u64; 3]) -> Result<RunPlan, RunnerError> {
    let benchmark = benchmark_of(spec)?;
    let mut params = match spec.scaling {
        Scaling::Weak => KernelParams::new(spec.base_problem),
        Scaling::Strong => KernelParams::strong(spec.base_problem, grid)?,
    };
    apply(&mut params, &spec.kernel_params);
    params.iterations = spec.iterations;
    params.timesteps = spec.kernel_params.timesteps.unwrap_or(spec.iterations);
    params.seed = spec.seed;
    Ok(RunPlan {
        benchmark,
        scaling: spec.scaling,
        grid,
        problem: spec.base_problem,
        params,
    })
}

/// Expands a spec into its runs, in the order the grids are listed.
pub fn plan(spec: &ExperimentSpec) -> Result<Vec<RunPlan>, RunnerError> {
    spec.grids.iter().map(|&g| plan_one(spec, g)).collect()
}

#[derive(Debug, Clone)]
pub struct RunOptions {
    /// Overrides the spec's `output_dir`.
    pub out_dir: Option<PathBuf>,
    pub trace: bool,
    pub per_rank: bool,
    pub mode: ExecMode,
    pub max_ranks: u64,
}

impl Default for RunOptions {
    fn default() -> Self {
        RunOptions {
            out_dir: None,
            trace: false,
            per_rank: false,
            mode: ExecMode::Deterministic,
            max_ranks: DEFAULT_MAX_RANKS,
        }
    }
}

/// Result of one in-memory run.
#[derive(Debug, Clone)]
pub struct Executed {
    pub profile: RunProfile,
    pub trace: Option<Vec<TraceRecord>>,
}

/// Runs one configuration without touching the filesystem.
pub fn execute(plan: &RunPlan, opts: &RunOptions) -> Result<Executed, RunnerError> {
    let nranks = plan.nranks();
    if nranks > opts.max_ranks {
        return Err(RunnerError::TooManyRanks {
            grid: plan.grid,
            nranks,
            cap: opts.max_ranks,
        });
    }
    let grid = Grid3D::new(plan.grid)?;
    let config = SimConfig::new(nranks as usize)
        .with_trace(opts.trace)
        .with_mode(opts.mode);
    let outcome = kernels::run(plan.benchmark, grid, &plan.params, &config)?;

    let mut kernel_params = plan.params.describe();
    if plan.benchmark == Benchmark::AmgVcycle {
        kernel_params.insert("levels".into(), hierarchy(grid, &plan.params).len() as u64);
    }
    let profile = RunProfile {
        meta: RunMeta {
            benchmark: plan.benchmark.to_string(),
            scaling: plan.scaling,
            nranks,
            grid: plan.grid,
            problem: plan.problem,
            kernel_params,
            seed: plan.params.seed,
            mode: opts.mode,
            elapsed_sec: outcome.elapsed_sec(),
        },
        summaries: outcome.summaries(),
        per_rank: opts.per_rank.then(|| outcome.stats.clone()),
    };
    Ok(Executed {
        profile,
        trace: outcome.trace,
    })
}

/// What one entry of a series produced.
#[derive(Debug)]
pub struct RunRecord {
    pub grid: [u64; 3],
    pub nranks: u64,
    pub outcome: Result<RunArtifacts, RunnerError>,
}

#[derive(Debug, Clone)]
pub struct RunArtifacts {
    pub profile_path: PathBuf,
    pub trace_path: Option<PathBuf>,
    pub elapsed_sec: f64,
    pub total_bytes: u64,
}

/// Per-run results of a whole series.
#[derive(Debug)]
pub struct SeriesReport {
    pub benchmark: String,
    pub runs: Vec<RunRecord>,
}

impl SeriesReport {
    pub fn all_ok(&self) -> bool {
        self.runs.iter().all(|r| r.outcome.is_ok())
    }

    pub fn profile_paths(&self) -> Vec<&Path> {
        self.runs
            .iter()
            .filter_map(|r| r.outcome.as_ref().ok())
            .map(|a| a.profile_path.as_path())
            .collect()
    }
}

impl fmt::Display for SeriesReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "{:<12} {:>7} {:>14} {:>16}  profile", "grid", "nranks", "elapsed_sec", "total_bytes")?;
        for r in &self.runs {
            let [x, y, z] = r.grid;
            let grid = format!("{x}x{y}x{z}");
            match &r.outcome {
                Ok(a) => writeln!(
                    f,
                    "{grid:<12} {:>7} {:>14.9} {:>16}  {}",
                    r.nranks,
                    a.elapsed_sec,
                    a.total_bytes,
                    a.profile_path.display()
                )?,
                Err(e) => writeln!(f, "{grid:<12} {:>7} {:>14} {:>16}  FAILED: {e}", r.nranks, "-", "-")?,
            }
        }
        let failed = self.runs.iter().filter(|r| r.outcome.is_err()).count();
        write!(f, "{} runs, {} failed", self.runs.len(), failed)
    }
}

fn write_run(plan: &RunPlan, opts: &RunOptions, dir: &Path) -> Result<RunArtifacts, RunnerError> {
    let run = execute(plan, opts)?;
    let stem = plan.file_stem();
    let profile_path = dir.join(format!("{stem}.commprof.json"));
    let json = to_canonical_json(&run.profile).map_err(|source| RunnerError::Parse {
        path: profile_path.clone(),
        source,
    })?;
    fs::write(&profile_path, json).map_err(io_err(&profile_path))?;
    let trace_path = match &run.trace {
        Some(records) => {
            let p = dir.join(format!("{stem}.trace.ndjson"));
            trace::write_trace_file(&p, records).map_err(io_err(&p))?;
            Some(p)
        }
        None => None,
    };
    Ok(RunArtifacts {
        profile_path,
        trace_path,
        elapsed_sec: run.profile.meta.elapsed_sec,
        total_bytes: run.profile.summaries.iter().map(|s| s.bytes_sent_sum).sum(),
    })
}

/// Runs every configuration in order. A failing run is recorded and the
/// series carries on; only setup problems (bad spec, unwritable directory)
/// return `Err`.
pub fn run_experiment(spec: &ExperimentSpec, opts: &RunOptions) -> Result<SeriesReport, RunnerError> {
    let spec = prepare(spec.clone())?;
    let plans = plan(&spec)?;
    let dir = opts
        .out_dir
        .clone()
        .unwrap_or_else(|| PathBuf::from(&spec.output_dir));
    fs::create_dir_all(&dir).map_err(io_err(&dir))?;
    let runs = plans
        .iter()
        .map(|p| RunRecord {
            grid: p.grid,
            nranks: p.nranks(),
            outcome: write_run(p, opts, &dir),
        })
        .collect();
    Ok(SeriesReport {
        benchmark: spec.benchmark,
        runs,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn spec(json: &str) -> Result<ExperimentSpec, RunnerError> {
        prepare(serde_json::from_str(json).unwrap())
    }

    #[test]
    fn defaults_are_filled() {
        let s = spec(r#"{"benchmark":"sweep","scaling":"weak","grids":[[2,2,2]],"base_problem":[4,4,4]}"#)
            .unwrap();
        let k = &s.kernel_params;
        assert_eq!(k.msgs_per_neighbor, Some(36));
        assert_eq!((k.fields_per_cell, k.element_bytes, k.coarsen_min), (Some(1), Some(8), Some(4)));
        assert_eq!((s.seed, s.iterations, s.output_dir.as_str()), (0, 1, "profiles"));
    }

    #[test]
    fn strong_divisibility_is_checked() {
        let e = spec(r#"{"benchmark":"lag_step","scaling":"strong","grids":[[3,3,3]],"base_problem":[32,32,32]}"#)
            .unwrap_err();
        assert!(matches!(e, RunnerError::Kernel(KernelError::NotDivisible { .. })), "{e}");
    }

    #[test]
    fn bad_specs_are_rejected() {
        let unknown = spec(r#"{"benchmark":"hpl","scaling":"weak","grids":[[1,1,1]],"base_problem":[4,4,4]}"#);
        assert!(matches!(unknown, Err(RunnerError::UnknownBenchmark(_))));
        let empty = spec(r#"{"benchmark":"halo3d","scaling":"weak","grids":[],"base_problem":[4,4,4]}"#);
        assert!(matches!(empty, Err(RunnerError::EmptyGrids)));
        let zero = spec(r#"{"benchmark":"halo3d","scaling":"weak","grids":[[0,1,1]],"base_problem":[4,4,4]}"#);
        assert!(matches!(zero, Err(RunnerError::ZeroGrid { .. })));
        let m0 = spec(
            r#"{"benchmark":"sweep","scaling":"weak","grids":[[1,1,1]],"base_problem":[4,4,4],
                "kernel_params":{"msgs_per_neighbor":0}}"#,
        );
        assert!(matches!(m0, Err(RunnerError::Kernel(KernelError::NonPositive(_)))));
    }

    #[test]
    fn weak_and_strong_sizing() {
        let weak = spec(r#"{"benchmark":"halo3d","scaling":"weak","grids":[[4,4,4],[8,4,4]],"base_problem":[32,32,16]}"#)
            .unwrap();
        let plans = plan(&weak).unwrap();
        assert!(plans.iter().all(|p| p.params.cells == [32, 32, 16] && p.problem == [32, 32, 16]));
        let strong = spec(
            r#"{"benchmark":"lag_step","scaling":"strong","grids":[[2,2,2],[4,2,2]],"base_problem":[64,64,64],"iterations":3}"#,
        )
        .unwrap();
        let plans = plan(&strong).unwrap();
        assert_eq!(plans[1].params.cells, [16, 32, 32]);
        assert_eq!(plans[1].problem, [64, 64, 64]);
        assert_eq!(plans[1].params.timesteps, 3);
        assert_eq!(plans[1].file_stem(), "lag_step_4x2x2");
    }

    #[test]
    fn rank_cap_applies_per_run() {
        let s = spec(r#"{"benchmark":"halo3d","scaling":"weak","grids":[[2,2,2]],"base_problem":[4,4,4]}"#)
            .unwrap();
        let opts = RunOptions {
            max_ranks: 4,
            ..RunOptions::default()
        };
        let e = execute(&plan(&s).unwrap()[0], &opts).unwrap_err();
        assert!(matches!(e, RunnerError::TooManyRanks { nranks: 8, cap: 4, .. }));
    }
}
