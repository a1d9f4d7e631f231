//! Communication-region profiling for message-passing programs.
//!
//! Programs mark groups of point-to-point and collective operations as named
//! communication regions. A rank-local profiler attributes every operation to
//! the innermost open region and, at each region end, folds message, peer and
//! byte-volume statistics into per-rank records that are later reduced across
//! ranks.
//!
//! The crate bundles a deterministic in-process runtime ([`sim`]), synthetic
//! halo-exchange, wavefront-sweep, multigrid and timestep kernels
//! ([`kernels`]), a scaling-series driver ([`runner`]) and profile analysis
//! ([`analysis`]).

pub mod analysis;
pub mod kernels;
pub mod model;
pub mod profiler;
pub mod runner;
pub mod sim;

pub use model::{
    ExperimentSpec, MessageEvent, RankId, RegionCommStats, RegionPath, RegionSummary, RunProfile,
};
pub use profiler::{summarize, RegionTracker};
pub use sim::{spawn, Comm, SimConfig, SimError};
