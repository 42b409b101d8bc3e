//! Dense voxel lattices for ground-truth environments and belief maps.
//!
//! The grid origin is the world origin: cell `(0, 0, 0)` spans
//! `[0, resolution)` on every axis. Linear indices are row-major with `x`
//! varying fastest.

mod generate;
mod io;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::scalar::{Real, Vec3};

pub use generate::{generate_boxes, generate_empty, BoxesParams};
pub use io::{load_environment, parse_environment, save_environment, write_environment};

/// Integer cell coordinates `(i, j, k)`.
pub type CellCoord = [usize; 3];

#[derive(Debug, Error)]
pub enum GridError {
    #[error("invalid grid parameters: {0}")]
    InvalidParameters(String),
    #[error("malformed header on line {line}: {reason}")]
    MalformedHeader { line: usize, reason: String },
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("payload length mismatch: expected {expected} cells, found {found}")]
    PayloadLength { expected: usize, found: usize },
    #[error("invalid payload character {0:?}")]
    InvalidPayload(char),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Dense 3-D lattice of cell payloads at a fixed resolution.
#[derive(Debug, Clone, PartialEq)]
pub struct VoxelGrid3<T, C> {
    dims: [usize; 3],
    resolution: T,
    cells: Vec<C>,
}

impl<T: Real, C: Clone> VoxelGrid3<T, C> {
    pub fn new(dims: [usize; 3], resolution: T, fill: C) -> Result<Self, GridError> {
        let len = Self::checked_len(dims, resolution)?;
        Ok(Self { dims, resolution, cells: vec![fill; len] })
    }

    pub fn from_cells(dims: [usize; 3], resolution: T, cells: Vec<C>) -> Result<Self, GridError> {
        let len = Self::checked_len(dims, resolution)?;
        if cells.len() != len {
            return Err(GridError::PayloadLength { expected: len, found: cells.len() });
        }
        Ok(Self { dims, resolution, cells })
    }

    fn checked_len(dims: [usize; 3], resolution: T) -> Result<usize, GridError> {
        if dims.contains(&0) {
            return Err(GridError::InvalidParameters(format!("dims must be >= 1, got {dims:?}")));
        }
        if !(resolution > T::zero()) || !resolution.is_finite() {
            return Err(GridError::InvalidParameters(format!("resolution must be > 0, got {resolution}")));
        }
        dims.iter().try_fold(1usize, |acc, &d| acc.checked_mul(d)).ok_or_else(|| GridError::InvalidParameters("grid too large".into()))
    }
}

impl<T: Real, C> VoxelGrid3<T, C> {
    /// Same lattice geometry with a different payload.
    pub fn map<D>(&self, f: impl FnMut(&C) -> D) -> VoxelGrid3<T, D> {
        VoxelGrid3 { dims: self.dims, resolution: self.resolution, cells: self.cells.iter().map(f).collect() }
    }

    pub fn dims(&self) -> [usize; 3] {
        self.dims
    }

    pub fn resolution(&self) -> T {
        self.resolution
    }

    pub fn len(&self) -> usize {
        self.cells.len()
    }

    pub fn is_empty(&self) -> bool {
        self.cells.is_empty()
    }

    pub fn cells(&self) -> &[C] {
        &self.cells
    }

    pub fn cells_mut(&mut self) -> &mut [C] {
        &mut self.cells
    }

    /// World-space size of the lattice in meters.
    pub fn extent(&self) -> Vec3<T> {
        let r = self.resolution;
        Vec3::new(T::from_usize_lossy(self.dims[0]) * r, T::from_usize_lossy(self.dims[1]) * r, T::from_usize_lossy(self.dims[2]) * r)
    }

    /// Volume of one cell in cubic meters.
    pub fn cell_volume(&self) -> T {
        self.resolution * self.resolution * self.resolution
    }

    pub fn in_bounds(&self, c: [i64; 3]) -> bool {
        (0..3).all(|a| c[a] >= 0 && (c[a] as usize) < self.dims[a])
    }

    #[inline]
    pub fn index(&self, c: CellCoord) -> usize {
        debug_assert!((0..3).all(|a| c[a] < self.dims[a]), "cell {c:?} out of bounds {:?}", self.dims);
        c[0] + self.dims[0] * (c[1] + self.dims[1] * c[2])
    }

    #[inline]
    pub fn coord(&self, index: usize) -> CellCoord {
        let nx = self.dims[0];
        let ny = self.dims[1];
        [index % nx, (index / nx) % ny, index / (nx * ny)]
    }

    pub fn get(&self, c: CellCoord) -> &C {
        &self.cells[self.index(c)]
    }

    pub fn set(&mut self, c: CellCoord, value: C) {
        let i = self.index(c);
        self.cells[i] = value;
    }

    /// Cell containing `point`, or `None` outside the lattice.
    pub fn world_to_cell(&self, point: Vec3<T>) -> Option<CellCoord> {
        let mut out = [0usize; 3];
        for (a, slot) in out.iter_mut().enumerate() {
            let f = (point.axis(a) / self.resolution).floor();
            if !f.is_finite() || f < T::zero() {
                return None;
            }
            let i = f.to_usize()?;
            if i >= self.dims[a] {
                return None;
            }
            *slot = i;
        }
        Some(out)
    }

    pub fn world_to_index(&self, point: Vec3<T>) -> Option<usize> {
        self.world_to_cell(point).map(|c| self.index(c))
    }

    /// Center of a cell: `(index + 0.5) * resolution` per axis.
    pub fn cell_to_world(&self, c: CellCoord) -> Vec3<T> {
        let half = T::lit(0.5);
        let r = self.resolution;
        Vec3::new((T::from_usize_lossy(c[0]) + half) * r, (T::from_usize_lossy(c[1]) + half) * r, (T::from_usize_lossy(c[2]) + half) * r)
    }

    /// 6-connected in-bounds neighbours of a linear index.
    pub fn neighbors6(&self, index: usize) -> impl Iterator<Item = usize> + '_ {
        let c = self.coord(index);
        const OFFSETS: [[i64; 3]; 6] = [[1, 0, 0], [-1, 0, 0], [0, 1, 0], [0, -1, 0], [0, 0, 1], [0, 0, -1]];
        OFFSETS.iter().filter_map(move |o| {
            let n = [c[0] as i64 + o[0], c[1] as i64 + o[1], c[2] as i64 + o[2]];
            self.in_bounds(n).then(|| self.index([n[0] as usize, n[1] as usize, n[2] as usize]))
        })
    }
}

/// Binary ground truth: `true` is occupied.
#[derive(Debug, Clone, PartialEq)]
pub struct GroundTruthEnvironment<T> {
    pub grid: VoxelGrid3<T, bool>,
}

impl<T: Real> GroundTruthEnvironment<T> {
    pub fn new(grid: VoxelGrid3<T, bool>) -> Self {
        Self { grid }
    }

    #[inline]
    pub fn is_occupied(&self, index: usize) -> bool {
        self.grid.cells[index]
    }

    pub fn occupied_count(&self) -> usize {
        self.grid.cells.iter().filter(|&&c| c).count()
    }

    pub fn free_count(&self) -> usize {
        self.grid.len() - self.occupied_count()
    }

    pub fn bounding_volume(&self) -> T {
        T::from_usize_lossy(self.grid.len()) * self.grid.cell_volume()
    }
}

/// What is known about one cell.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum CellKnowledge {
    Unknown,
    KnownFree,
    KnownOccupied,
}

impl CellKnowledge {
    pub fn is_known(self) -> bool {
        self != CellKnowledge::Unknown
    }
}

/// Tri-state map with a uniform Bernoulli occupancy prior on unknown cells.
#[derive(Debug, Clone, PartialEq)]
pub struct BeliefMap<T> {
    pub grid: VoxelGrid3<T, CellKnowledge>,
    occupancy_prior: T,
}

impl<T: Real> BeliefMap<T> {
    /// Fully unknown map with the geometry of `like`.
    pub fn unknown_like<C>(like: &VoxelGrid3<T, C>, occupancy_prior: T) -> Result<Self, GridError> {
        let grid = VoxelGrid3 { dims: like.dims, resolution: like.resolution, cells: vec![CellKnowledge::Unknown; like.len()] };
        Self::new(grid, occupancy_prior)
    }

    pub fn new(grid: VoxelGrid3<T, CellKnowledge>, occupancy_prior: T) -> Result<Self, GridError> {
        if !(occupancy_prior > T::zero() && occupancy_prior < T::one()) {
            return Err(GridError::InvalidParameters(format!("occupancy prior must lie in (0, 1), got {occupancy_prior}")));
        }
        Ok(Self { grid, occupancy_prior })
    }

    pub fn occupancy_prior(&self) -> T {
        self.occupancy_prior
    }

    /// Same knowledge under a different prior.
    pub fn with_prior(&self, occupancy_prior: T) -> Result<Self, GridError> {
        Self::new(self.grid.clone(), occupancy_prior)
    }

    #[inline]
    pub fn knowledge(&self, index: usize) -> CellKnowledge {
        self.grid.cells[index]
    }

    pub fn unknown_count(&self) -> usize {
        self.grid.cells.iter().filter(|c| **c == CellKnowledge::Unknown).count()
    }

    pub fn known_count(&self) -> usize {
        self.grid.len() - self.unknown_count()
    }

    /// Probability that a cell is occupied under this belief.
    pub fn occupancy_probability(&self, index: usize) -> T {
        match self.knowledge(index) {
            CellKnowledge::Unknown => self.occupancy_prior,
            CellKnowledge::KnownFree => T::zero(),
            CellKnowledge::KnownOccupied => T::one(),
        }
    }
}

/// Draws an environment consistent with `belief`.
///
/// Known cells are copied; each unknown cell is occupied independently with
/// the belief's prior. Cells are visited in index order from a ChaCha8 stream
/// seeded with `seed`.
pub fn sample_environment<T: Real>(belief: &BeliefMap<T>, seed: u64) -> GroundTruthEnvironment<T> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let p = belief.occupancy_prior.to_f64_lossy();
    let grid = belief.grid.map(|k| match k {
        CellKnowledge::KnownFree => false,
        CellKnowledge::KnownOccupied => true,
        CellKnowledge::Unknown => rng.gen::<f64>() < p,
    });
    GroundTruthEnvironment::new(grid)
}
