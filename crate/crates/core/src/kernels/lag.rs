use super::halo::{face_exchange, TAG_HALO};
use super::{check_grid, ComputeStub, Grid3D, KernelParams};
use crate::model::Labels;
use crate::sim::{Comm, SimError};

/// Bytes in the timestep's scalar reductions.
pub const SCALAR_BYTES: u64 = 8;

/// Lagrangian-style timestep loop: a halo exchange, a global time-step
/// reduction and a broadcast of the chosen step, each inside `timestep`.
pub async fn lag_step(comm: Comm, grid: Grid3D, params: KernelParams) -> Result<(), SimError> {
    check_grid(&comm, &grid)?;
    let mut stub = ComputeStub::new(params.seed, comm.rank());
    comm.comm_region_begin("main", Labels::new())?;
    for t in 0..params.timesteps {
        comm.comm_region_begin("timestep", Labels::new())?;
        stub.run(&comm, params.cell_count());
        comm.comm_region_begin("halo_exchange", Labels::new())?;
        face_exchange(&comm, &grid, &params, params.cells, TAG_HALO, t).await?;
        comm.comm_region_end("halo_exchange")?;
        comm.allreduce(SCALAR_BYTES).await?;
        comm.bcast(0, SCALAR_BYTES).await?;
        comm.comm_region_end("timestep")?;
    }
    comm.comm_region_end("main")
}
