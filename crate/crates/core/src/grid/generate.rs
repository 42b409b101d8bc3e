use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{GridError, GroundTruthEnvironment, VoxelGrid3};
use crate::scalar::{Real, Vec3};

/// Half-width of the cube around the start location that is always carved free.
pub const START_CLEARANCE: f64 = 0.5;

fn dims_for<T: Real>(extent: Vec3<T>, resolution: T) -> Result<[usize; 3], GridError> {
    let mut dims = [0usize; 3];
    for (a, d) in dims.iter_mut().enumerate() {
        let e = extent.axis(a);
        if !(e > T::zero()) {
            return Err(GridError::InvalidParameters(format!("extent must be positive, got {e} on axis {a}")));
        }
        // round so that 4.0 / 0.1 gives 40 rather than 39.999..
        *d = (e / resolution).round().to_usize().unwrap_or(0).max(1);
    }
    Ok(dims)
}

/// All-free environment covering `extent` meters.
pub fn generate_empty<T: Real>(extent: Vec3<T>, resolution: T) -> Result<GroundTruthEnvironment<T>, GridError> {
    let dims = dims_for(extent, resolution)?;
    Ok(GroundTruthEnvironment::new(VoxelGrid3::new(dims, resolution, false)?))
}

/// Parameters of the random axis-aligned boxes generator.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoxesParams<T> {
    pub seed: u64,
    pub extent: Vec3<T>,
    pub resolution: T,
    pub box_count: usize,
    /// Edge length range in meters, sampled independently per axis.
    pub box_size: (T, T),
    /// Start location; a cube of half-width [`START_CLEARANCE`] around it is carved free.
    pub start: Vec3<T>,
}

/// Random boxes environment, deterministic in `params.seed`.
pub fn generate_boxes<T: Real>(params: &BoxesParams<T>) -> Result<GroundTruthEnvironment<T>, GridError> {
    let dims = dims_for(params.extent, params.resolution)?;
    let (lo, hi) = params.box_size;
    let min_extent = params.extent.x.min(params.extent.y).min(params.extent.z);
    if params.box_count > 0 && !(lo > T::zero() && lo <= hi && hi <= min_extent) {
        return Err(GridError::InvalidParameters(format!("box size range ({lo}, {hi}) must satisfy 0 < min <= max <= {min_extent}")));
    }
    let mut grid = VoxelGrid3::new(dims, params.resolution, false)?;
    let mut rng = ChaCha8Rng::seed_from_u64(params.seed);
    let (lo64, hi64) = (lo.to_f64_lossy(), hi.to_f64_lossy());
    let extent = params.extent.to_f64();

    for _ in 0..params.box_count {
        let mut min = [0.0f64; 3];
        let mut max = [0.0f64; 3];
        for a in 0..3 {
            let size = if hi64 > lo64 { rng.gen_range(lo64..=hi64) } else { lo64 };
            let corner = if extent[a] > size { rng.gen_range(0.0..=extent[a] - size) } else { 0.0 };
            min[a] = corner;
            max[a] = corner + size;
        }
        fill_box(&mut grid, min, max, true);
    }

    let start = params.start.to_f64();
    let c = START_CLEARANCE;
    fill_box(&mut grid, [start[0] - c, start[1] - c, start[2] - c], [start[0] + c, start[1] + c, start[2] + c], false);
    if let Some(idx) = grid.world_to_index(params.start) {
        grid.cells_mut()[idx] = false;
    }

    let env = GroundTruthEnvironment::new(grid);
    if params.box_count > 0 && env.occupied_count() == 0 {
        return Err(GridError::InvalidParameters("start-region carving removed every box; no occupied cells remain".into()));
    }
    Ok(env)
}

/// Sets every cell whose center lies in `[min, max)` to `value`.
fn fill_box<T: Real>(grid: &mut VoxelGrid3<T, bool>, min: [f64; 3], max: [f64; 3], value: bool) {
    let r = grid.resolution().to_f64_lossy();
    let dims = grid.dims();
    let mut range = [(0usize, 0usize); 3];
    for a in 0..3 {
        // center (i + 0.5) r in [min, max)  <=>  i in [min/r - 0.5, max/r - 0.5)
        let first = (min[a] / r - 0.5).ceil().max(0.0) as usize;
        let last = ((max[a] / r - 0.5).ceil().max(0.0) as usize).min(dims[a]);
        range[a] = (first, last);
    }
    for k in range[2].0..range[2].1 {
        for j in range[1].0..range[1].1 {
            for i in range[0].0..range[0].1 {
                grid.set([i, j, k], value);
            }
        }
    }
}
