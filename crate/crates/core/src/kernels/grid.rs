use super::KernelError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Direction {
    Minus,
    Plus,
}

impl Direction {
    pub fn opposite(self) -> Self {
        match self {
            Direction::Minus => Direction::Plus,
            Direction::Plus => Direction::Minus,
        }
    }
}

/// One of the six faces of a rank's subdomain.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Face {
    pub axis: usize,
    pub dir: Direction,
}

impl Face {
    pub const ALL: [Face; 6] = [
        Face { axis: 0, dir: Direction::Minus },
        Face { axis: 0, dir: Direction::Plus },
        Face { axis: 1, dir: Direction::Minus },
        Face { axis: 1, dir: Direction::Plus },
        Face { axis: 2, dir: Direction::Minus },
        Face { axis: 2, dir: Direction::Plus },
    ];

    /// Stable index in `0..6`.
    pub fn index(self) -> u32 {
        (self.axis as u32) * 2 + u32::from(self.dir == Direction::Plus)
    }

    pub fn opposite(self) -> Face {
        Face {
            axis: self.axis,
            dir: self.dir.opposite(),
        }
    }
}

/// 3D Cartesian arrangement of ranks; x varies fastest, z slowest.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Grid3D {
    dims: [usize; 3],
}

impl Grid3D {
    pub fn new(dims: [u64; 3]) -> Result<Self, KernelError> {
        if dims.contains(&0) {
            return Err(KernelError::EmptyGrid { grid: dims });
        }
        Ok(Grid3D {
            dims: dims.map(|d| d as usize),
        })
    }

    pub fn dims(&self) -> [usize; 3] {
        self.dims
    }

    pub fn nranks(&self) -> usize {
        self.dims.iter().product()
    }

    pub fn coords(&self, rank: usize) -> [usize; 3] {
        let [px, py, _] = self.dims;
        [rank % px, (rank / px) % py, rank / (px * py)]
    }

    pub fn rank_of(&self, c: [usize; 3]) -> usize {
        let [px, py, _] = self.dims;
        c[0] + px * (c[1] + py * c[2])
    }

    pub fn neighbor(&self, rank: usize, face: Face) -> Option<usize> {
        let mut c = self.coords(rank);
        match face.dir {
            Direction::Minus => c[face.axis] = c[face.axis].checked_sub(1)?,
            Direction::Plus => {
                c[face.axis] += 1;
                if c[face.axis] >= self.dims[face.axis] {
                    return None;
                }
            }
        }
        Some(self.rank_of(c))
    }

    /// Existing face neighbours in [`Face::ALL`] order.
    pub fn face_neighbors(&self, rank: usize) -> Vec<(Face, usize)> {
        Face::ALL
            .iter()
            .filter_map(|&f| self.neighbor(rank, f).map(|n| (f, n)))
            .collect()
    }
}
