use super::{check_grid, ComputeStub, Direction, Face, Grid3D, KernelParams};
use crate::model::Labels;
use crate::sim::{Comm, Request, SimError};

pub const OCTANTS: u32 = 8;
const TAG_SWEEP: u32 = 1_000;

/// Direction towards the octant's origin corner along `axis`.
fn origin_side(octant: u32, axis: usize) -> Direction {
    if octant >> axis & 1 == 1 {
        Direction::Plus
    } else {
        Direction::Minus
    }
}

/// Faces whose neighbour is closer to the octant's origin corner.
pub fn upwind_faces(octant: u32) -> [Face; 3] {
    [0, 1, 2].map(|axis| Face {
        axis,
        dir: origin_side(octant, axis),
    })
}

/// Faces whose neighbour lies further along the sweep direction.
pub fn downwind_faces(octant: u32) -> [Face; 3] {
    upwind_faces(octant).map(Face::opposite)
}

/// Wavefront transport sweep. Each iteration is one `sweep_comm` instance
/// covering all eight octant phases; within a phase a rank waits for every
/// upwind message before computing and sending downwind.
pub async fn sweep(comm: Comm, grid: Grid3D, params: KernelParams) -> Result<(), SimError> {
    check_grid(&comm, &grid)?;
    let me = comm.rank().index();
    let m = params.msgs_per_neighbor;
    let cells = params.cell_count();
    let mut stub = ComputeStub::new(params.seed, comm.rank());

    comm.comm_region_begin("main", Labels::new())?;
    stub.run(&comm, cells);
    comm.comm_region_begin("solve", Labels::new())?;
    for it in 0..params.iterations {
        comm.comm_region_begin("sweep_comm", Labels::new())?;
        for octant in 0..OCTANTS {
            let tag = TAG_SWEEP + octant * 2 + (it % 2) as u32;
            let mut recvs: Vec<Request> = Vec::new();
            for face in upwind_faces(octant) {
                if let Some(n) = grid.neighbor(me, face) {
                    for _ in 0..m {
                        recvs.push(comm.irecv(n, tag, params.face_bytes(face.axis))?);
                    }
                }
            }
            comm.wait_all(&recvs).await?;
            stub.run(&comm, cells);
            let mut sends: Vec<Request> = Vec::new();
            for face in downwind_faces(octant) {
                if let Some(n) = grid.neighbor(me, face) {
                    for _ in 0..m {
                        sends.push(comm.isend(n, tag, params.face_bytes(face.axis))?);
                    }
                }
            }
            comm.wait_all(&sends).await?;
        }
        comm.comm_region_end("sweep_comm")?;
        stub.run(&comm, cells);
    }
    comm.comm_region_end("solve")?;
    comm.comm_region_end("main")
}
