//! Synthetic communication kernels over a 3D Cartesian rank grid.
//!
//! Each kernel is an async rank program annotated with communication regions:
//!
//! - [`halo3d`]: face exchange with every face neighbour, once per iteration.
//! - [`sweep`]: wavefront sweep over eight octants, `m` messages per
//!   downwind neighbour.
//! - [`amg_vcycle`]: multigrid descent with per-level `MatVecComm` setup and
//!   halo exchange, redistributing onto every eighth rank at coarse levels.
//! - [`lag_step`]: timestep loop with a halo exchange and two collectives.
//!
//! Boundaries are open (no periodic wrap), so corner ranks have three face
//! neighbours and interior ranks six.

mod amg;
mod grid;
mod halo;
mod lag;
mod sweep;

pub use amg::{amg_vcycle, hierarchy, AmgLevel};
pub use grid::{Direction, Face, Grid3D};
pub use halo::halo3d;
pub use lag::lag_step;
pub use sweep::{downwind_faces, sweep, upwind_faces, OCTANTS};

use crate::model::{Benchmark, RankId};
use crate::sim::{self, Comm, RunOutcome, SimConfig, SimError};
use rand::{Rng, SeedableRng};
use std::collections::BTreeMap;
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum KernelError {
    #[error("kernel parameter {0} must be positive")]
    NonPositive(&'static str),
    #[error("grid {grid:?} has a zero dimension")]
    EmptyGrid { grid: [u64; 3] },
    #[error("global problem {global:?} is not divisible by grid {grid:?}")]
    NotDivisible { global: [u64; 3], grid: [u64; 3] },
}

/// Per-rank sizing and knobs for one kernel run.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct KernelParams {
    /// Cells owned by each rank along x, y, z.
    pub cells: [u64; 3],
    pub fields_per_cell: u64,
    pub element_bytes: u64,
    pub iterations: u64,
    /// Sweep only: messages per downwind neighbour per octant.
    pub msgs_per_neighbor: u64,
    /// Multigrid only: smallest per-rank dimension kept before redistributing.
    pub coarsen_min: u64,
    /// Multigrid only: optional cap on the number of levels.
    pub max_levels: Option<u64>,
    pub timesteps: u64,
    /// Seeds the compute stub's input; communication never depends on it.
    pub seed: u64,
}

impl KernelParams {
    pub const DEFAULT_FIELDS_PER_CELL: u64 = 1;
    pub const DEFAULT_ELEMENT_BYTES: u64 = 8;
    pub const DEFAULT_MSGS_PER_NEIGHBOR: u64 = 36;
    pub const DEFAULT_COARSEN_MIN: u64 = 4;

    pub fn new(cells: [u64; 3]) -> Self {
        KernelParams {
            cells,
            fields_per_cell: Self::DEFAULT_FIELDS_PER_CELL,
            element_bytes: Self::DEFAULT_ELEMENT_BYTES,
            iterations: 1,
            msgs_per_neighbor: Self::DEFAULT_MSGS_PER_NEIGHBOR,
            coarsen_min: Self::DEFAULT_COARSEN_MIN,
            max_levels: None,
            timesteps: 1,
            seed: 0,
        }
    }

    /// Per-rank sizing for a fixed global problem split over `grid`.
    pub fn strong(global: [u64; 3], grid: [u64; 3]) -> Result<Self, KernelError> {
        Ok(Self::new(split_global(global, grid)?))
    }

    pub fn validate(&self) -> Result<(), KernelError> {
        if self.cells.contains(&0) {
            return Err(KernelError::NonPositive("cells"));
        }
        let scalars = [
            ("fields_per_cell", self.fields_per_cell),
            ("element_bytes", self.element_bytes),
            ("iterations", self.iterations),
            ("msgs_per_neighbor", self.msgs_per_neighbor),
            ("coarsen_min", self.coarsen_min),
            ("timesteps", self.timesteps),
        ];
        for (name, v) in scalars {
            if v == 0 {
                return Err(KernelError::NonPositive(name));
            }
        }
        if self.max_levels == Some(0) {
            return Err(KernelError::NonPositive("max_levels"));
        }
        Ok(())
    }

    pub fn cell_count(&self) -> u64 {
        self.cells.iter().product()
    }

    /// Bytes in one face message orthogonal to `axis` at the given per-rank size.
    pub fn face_bytes_for(&self, cells: [u64; 3], axis: usize) -> u64 {
        plane_area(cells, axis) * self.fields_per_cell * self.element_bytes
    }

    pub fn face_bytes(&self, axis: usize) -> u64 {
        self.face_bytes_for(self.cells, axis)
    }

    /// Parameters recorded in profile metadata.
    pub fn describe(&self) -> BTreeMap<String, u64> {
        let mut m = BTreeMap::new();
        m.insert("fields_per_cell".into(), self.fields_per_cell);
        m.insert("element_bytes".into(), self.element_bytes);
        m.insert("iterations".into(), self.iterations);
        m.insert("msgs_per_neighbor".into(), self.msgs_per_neighbor);
        m.insert("coarsen_min".into(), self.coarsen_min);
        if let Some(l) = self.max_levels {
            m.insert("max_levels".into(), l);
        }
        m.insert("timesteps".into(), self.timesteps);
        m
    }
}

/// Product of the two per-rank dimensions orthogonal to `axis`.
pub fn plane_area(cells: [u64; 3], axis: usize) -> u64 {
    (0..3).filter(|&a| a != axis).map(|a| cells[a]).product()
}

/// Splits a global problem evenly over `grid`.
pub fn split_global(global: [u64; 3], grid: [u64; 3]) -> Result<[u64; 3], KernelError> {
    if grid.contains(&0) {
        return Err(KernelError::EmptyGrid { grid });
    }
    if (0..3).any(|a| !global[a].is_multiple_of(grid[a])) {
        return Err(KernelError::NotDivisible { global, grid });
    }
    Ok([global[0] / grid[0], global[1] / grid[1], global[2] / grid[2]])
}

fn check_grid(comm: &Comm, grid: &Grid3D) -> Result<(), SimError> {
    if grid.nranks() != comm.size() {
        return Err(SimError::Config {
            rank: comm.rank(),
            message: format!(
                "grid {:?} has {} ranks but the communicator has {}",
                grid.dims(),
                grid.nranks(),
                comm.size()
            ),
        });
    }
    Ok(())
}

/// Fixed-size arithmetic loop standing in for local work.
struct ComputeStub {
    state: f64,
}

impl ComputeStub {
    fn new(seed: u64, rank: RankId) -> Self {
        let mut rng = rand::rngs::StdRng::seed_from_u64(seed ^ (u64::from(rank.0) << 32));
        ComputeStub {
            state: rng.gen_range(0.0..1.0),
        }
    }

    fn run(&mut self, comm: &Comm, cells: u64) {
        let mut acc = self.state;
        for _ in 0..cells {
            acc = acc.mul_add(0.999_999, 1e-6);
        }
        self.state = std::hint::black_box(acc);
        comm.charge_compute(cells);
    }
}

/// Runs one bundled benchmark to completion.
pub fn run(
    benchmark: Benchmark,
    grid: Grid3D,
    params: &KernelParams,
    config: &SimConfig,
) -> Result<RunOutcome, SimError> {
    match benchmark {
        Benchmark::Halo3d => sim::spawn(config, |c| halo3d(c, grid, params.clone())),
        Benchmark::Sweep => sim::spawn(config, |c| sweep(c, grid, params.clone())),
        Benchmark::AmgVcycle => sim::spawn(config, |c| amg_vcycle(c, grid, params.clone())),
        Benchmark::LagStep => sim::spawn(config, |c| lag_step(c, grid, params.clone())),
    }
}
