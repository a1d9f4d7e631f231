use super::{check_grid, ComputeStub, Face, Grid3D, KernelParams};
use crate::model::Labels;
use crate::sim::{Comm, Request, SimError};

pub(super) const TAG_HALO: u32 = 100;

/// Tag for a face message travelling through `face` of its sender.
pub(super) fn face_tag(base: u32, face: Face, iteration: u64) -> u32 {
    base + face.index() * 2 + (iteration % 2) as u32
}

/// Posts receives from and sends to every face neighbour, then waits on all.
pub(super) async fn face_exchange(
    comm: &Comm,
    grid: &Grid3D,
    params: &KernelParams,
    cells: [u64; 3],
    base: u32,
    iteration: u64,
) -> Result<(), SimError> {
    let me = comm.rank().index();
    let neighbors = grid.face_neighbors(me);
    let mut reqs: Vec<Request> = Vec::with_capacity(neighbors.len() * 2);
    for &(face, n) in &neighbors {
        let bytes = params.face_bytes_for(cells, face.axis);
        // The incoming message left the neighbour through the opposite face.
        reqs.push(comm.irecv(n, face_tag(base, face.opposite(), iteration), bytes)?);
    }
    for &(face, n) in &neighbors {
        let bytes = params.face_bytes_for(cells, face.axis);
        reqs.push(comm.isend(n, face_tag(base, face, iteration), bytes)?);
    }
    comm.wait_all(&reqs).await?;
    Ok(())
}

/// Nearest-neighbour stencil: one face exchange and one compute step per
/// iteration.
pub async fn halo3d(comm: Comm, grid: Grid3D, params: KernelParams) -> Result<(), SimError> {
    check_grid(&comm, &grid)?;
    let mut stub = ComputeStub::new(params.seed, comm.rank());
    comm.comm_region_begin("main", Labels::new())?;
    for it in 0..params.iterations {
        comm.comm_region_begin("halo_exchange", Labels::new())?;
        face_exchange(&comm, &grid, &params, params.cells, TAG_HALO, it).await?;
        comm.comm_region_end("halo_exchange")?;
        stub.run(&comm, params.cell_count());
    }
    comm.comm_region_end("main")
}
