use super::halo::face_tag;
use super::{check_grid, ComputeStub, Grid3D, KernelParams};
use crate::model::{labels, Labels};
use crate::sim::{Comm, Request, SimError};

const TAG_MATVEC: u32 = 2_000;
const TAG_HALO: u32 = 3_000;
const TAG_AGGREGATE: u32 = 4_000;
const TAGS_PER_LEVEL: u32 = 16;

/// Bytes in each neighbour-list setup message.
pub const SETUP_BYTES: u64 = 64;

/// One level of the multigrid hierarchy.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AmgLevel {
    pub index: u64,
    /// Arrangement of the ranks still active at this level.
    pub grid: Grid3D,
    /// World rank of each active-grid position.
    pub members: Vec<usize>,
    /// Cells per active rank.
    pub cells: [u64; 3],
    /// Whether this level gathered data onto one survivor per 2×2×2 block.
    pub redistributed: bool,
}

impl AmgLevel {
    pub fn position(&self, world_rank: usize) -> Option<usize> {
        self.members.iter().position(|&w| w == world_rank)
    }
}

fn can_redistribute(grid: &Grid3D) -> bool {
    grid.dims().iter().all(|&d| d >= 4 && d % 2 == 0)
}

/// Builds the level hierarchy. Per-rank dims halve while they stay at or
/// above `coarsen_min`; below that the active grid halves along every axis,
/// keeping the lowest rank of each 2×2×2 block. Stops when neither applies or
/// at `max_levels`.
pub fn hierarchy(grid: Grid3D, params: &KernelParams) -> Vec<AmgLevel> {
    let mut levels = vec![AmgLevel {
        index: 0,
        grid,
        members: (0..grid.nranks()).collect(),
        cells: params.cells,
        redistributed: false,
    }];
    let cap = params.max_levels.unwrap_or(u64::MAX);
    while (levels.len() as u64) < cap {
        let last = levels.last().expect("at least one level");
        let half = last.cells.map(|c| c / 2);
        let next = if last.cells.iter().all(|c| c % 2 == 0)
            && half.iter().all(|&c| c >= params.coarsen_min)
        {
            AmgLevel {
                index: last.index + 1,
                grid: last.grid,
                members: last.members.clone(),
                cells: half,
                redistributed: false,
            }
        } else if can_redistribute(&last.grid) {
            let [px, py, pz] = last.grid.dims();
            let coarse = Grid3D::new([px / 2, py / 2, pz / 2].map(|d| d as u64))
                .expect("halved grid is non-empty");
            let members = (0..coarse.nranks())
                .map(|p| {
                    let c = coarse.coords(p).map(|x| 2 * x);
                    last.members[last.grid.rank_of(c)]
                })
                .collect();
            AmgLevel {
                index: last.index + 1,
                grid: coarse,
                members,
                cells: last.cells,
                redistributed: true,
            }
        } else {
            break;
        };
        levels.push(next);
    }
    levels
}

/// Block peers that retire into `survivor` when `level` is redistributed.
fn retirees(prev: &AmgLevel, level: &AmgLevel, survivor_pos: usize) -> Vec<usize> {
    let base = level.grid.coords(survivor_pos).map(|x| 2 * x);
    let mut out = Vec::with_capacity(7);
    for dz in 0..2 {
        for dy in 0..2 {
            for dx in 0..2 {
                if (dx, dy, dz) == (0, 0, 0) {
                    continue;
                }
                let c = [base[0] + dx, base[1] + dy, base[2] + dz];
                out.push(prev.members[prev.grid.rank_of(c)]);
            }
        }
    }
    out
}

fn survivor_of(prev: &AmgLevel, level: &AmgLevel, prev_pos: usize) -> usize {
    let c = prev.grid.coords(prev_pos).map(|x| x / 2);
    level.members[level.grid.rank_of(c)]
}

/// Persistent face-exchange requests for active ranks, created once.
fn persistent_exchange(
    comm: &Comm,
    level: &AmgLevel,
    params: &KernelParams,
    pos: usize,
) -> Result<Vec<Request>, SimError> {
    let tag_base = TAG_HALO + level.index as u32 * TAGS_PER_LEVEL;
    let neighbors = level.grid.face_neighbors(pos);
    let mut reqs = Vec::with_capacity(neighbors.len() * 2);
    for &(face, n) in &neighbors {
        let bytes = params.face_bytes_for(level.cells, face.axis);
        reqs.push(comm.recv_init(level.members[n], face_tag(tag_base, face.opposite(), 0), bytes)?);
    }
    for &(face, n) in &neighbors {
        let bytes = params.face_bytes_for(level.cells, face.axis);
        reqs.push(comm.send_init(level.members[n], face_tag(tag_base, face, 0), bytes)?);
    }
    Ok(reqs)
}

async fn matvec_setup(
    comm: &Comm,
    level: &AmgLevel,
    pos: usize,
    iteration: u64,
) -> Result<(), SimError> {
    let tag_base = TAG_MATVEC + level.index as u32 * TAGS_PER_LEVEL;
    let neighbors = level.grid.face_neighbors(pos);
    let mut reqs = Vec::with_capacity(neighbors.len() * 2);
    for &(face, n) in &neighbors {
        let tag = face_tag(tag_base, face.opposite(), iteration);
        reqs.push(comm.irecv(level.members[n], tag, SETUP_BYTES)?);
    }
    for &(face, n) in &neighbors {
        let tag = face_tag(tag_base, face, iteration);
        reqs.push(comm.isend(level.members[n], tag, SETUP_BYTES)?);
    }
    comm.wait_all(&reqs).await?;
    Ok(())
}

/// Multigrid descent. Per level each active rank performs a `MatVecComm`
/// setup exchange and a persistent `halo_exchange`, both labelled with the
/// level. On a redistributed level the retiring ranks send their coarsened
/// data to the block survivor inside that level's `halo_exchange`.
pub async fn amg_vcycle(comm: Comm, grid: Grid3D, params: KernelParams) -> Result<(), SimError> {
    check_grid(&comm, &grid)?;
    let me = comm.rank().index();
    let levels = hierarchy(grid, &params);
    let mut stub = ComputeStub::new(params.seed, comm.rank());

    let mut persistent: Vec<Option<Vec<Request>>> = Vec::with_capacity(levels.len());
    for level in &levels {
        persistent.push(match level.position(me) {
            Some(pos) => Some(persistent_exchange(&comm, level, &params, pos)?),
            None => None,
        });
    }

    comm.comm_region_begin("main", Labels::new())?;
    for it in 0..params.iterations {
        for (l, level) in levels.iter().enumerate() {
            let tag = labels([("level", level.index.to_string())]);
            let pos = level.position(me);
            if let Some(pos) = pos {
                comm.comm_region_begin("MatVecComm", tag.clone())?;
                matvec_setup(&comm, level, pos, it).await?;
                comm.comm_region_end("MatVecComm")?;
            }

            let prev = if level.redistributed { Some(&levels[l - 1]) } else { None };
            let prev_pos = prev.and_then(|p| p.position(me));
            if pos.is_none() && prev_pos.is_none() {
                continue;
            }
            comm.comm_region_begin("halo_exchange", tag)?;
            if let (Some(prev), Some(prev_pos)) = (prev, prev_pos) {
                let agg_cells = prev.cells.map(|c| c / 2);
                let agg_bytes =
                    agg_cells.iter().product::<u64>() * params.fields_per_cell * params.element_bytes;
                let agg_tag = TAG_AGGREGATE + level.index as u32 * 2 + (it % 2) as u32;
                match pos {
                    Some(p) => {
                        let mut reqs = Vec::with_capacity(7);
                        for src in retirees(prev, level, p) {
                            reqs.push(comm.irecv(src, agg_tag, agg_bytes)?);
                        }
                        comm.wait_all(&reqs).await?;
                    }
                    None => {
                        let dst = survivor_of(prev, level, prev_pos);
                        let r = comm.isend(dst, agg_tag, agg_bytes)?;
                        comm.wait(r).await?;
                    }
                }
            }
            if let Some(reqs) = &persistent[l] {
                comm.start_all(reqs)?;
                comm.wait_all(reqs).await?;
            }
            comm.comm_region_end("halo_exchange")?;
            if pos.is_some() {
                stub.run(&comm, level.cells.iter().product());
            }
        }
    }
    comm.comm_region_end("main")
}
