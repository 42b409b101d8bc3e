//! Depth camera, voxel ray traversal and noiseless observation fusion.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::grid::{BeliefMap, CellKnowledge, GroundTruthEnvironment, VoxelGrid3};
use crate::scalar::{Real, Vec3};

#[derive(Debug, Error, PartialEq)]
pub enum SensingError {
    #[error("invalid camera model: {0}")]
    InvalidCamera(String),
    #[error("observation of cell {cell} contradicts the belief ({known:?} vs occupied={observed})")]
    Contradiction { cell: usize, known: CellKnowledge, observed: bool },
    #[error("observed cell {0} lies outside the belief map")]
    OutOfBounds(usize),
}

/// Heading quantized to quarter turns. `East` faces +x, `North` faces +y.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Yaw {
    East,
    North,
    West,
    South,
}

impl Yaw {
    pub const ALL: [Yaw; 4] = [Yaw::East, Yaw::North, Yaw::West, Yaw::South];

    pub fn quarter_turns(self) -> u8 {
        match self {
            Yaw::East => 0,
            Yaw::North => 1,
            Yaw::West => 2,
            Yaw::South => 3,
        }
    }

    pub fn from_quarter_turns(q: u8) -> Self {
        Self::ALL[(q % 4) as usize]
    }

    pub fn radians<T: Real>(self) -> T {
        T::from_u8(self.quarter_turns()).unwrap() * T::lit(std::f64::consts::FRAC_PI_2)
    }

    /// Counter-clockwise quarter turn (+π/2).
    pub fn turn_left(self) -> Self {
        Self::from_quarter_turns(self.quarter_turns() + 1)
    }

    /// Clockwise quarter turn (−π/2).
    pub fn turn_right(self) -> Self {
        Self::from_quarter_turns(self.quarter_turns() + 3)
    }

    /// Exact unit `(cos, sin)` of the heading.
    pub fn cos_sin<T: Real>(self) -> (T, T) {
        let (o, z) = (T::one(), T::zero());
        match self {
            Yaw::East => (o, z),
            Yaw::North => (z, o),
            Yaw::West => (-o, z),
            Yaw::South => (z, -o),
        }
    }

    /// Rotates a body-frame vector into the world frame.
    pub fn rotate<T: Real>(self, v: Vec3<T>) -> Vec3<T> {
        let (c, s) = self.cos_sin::<T>();
        Vec3::new(c * v.x - s * v.y, s * v.x + c * v.y, v.z)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RobotState<T> {
    pub position: Vec3<T>,
    pub yaw: Yaw,
}

impl<T: Real> RobotState<T> {
    pub fn new(position: Vec3<T>, yaw: Yaw) -> Self {
        Self { position, yaw }
    }
}

/// Forward-facing pinhole depth camera; one ray per pixel center.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CameraModel<T> {
    pub max_range: T,
    /// Image width in pixels (horizontal).
    pub columns: usize,
    /// Image height in pixels (vertical).
    pub rows: usize,
    /// Full horizontal field of view in degrees.
    pub fov_horizontal: T,
    /// Full vertical field of view in degrees.
    pub fov_vertical: T,
}

impl<T: Real> CameraModel<T> {
    pub fn new(max_range: T, columns: usize, rows: usize, fov_horizontal: T, fov_vertical: T) -> Result<Self, SensingError> {
        let cam = Self { max_range, columns, rows, fov_horizontal, fov_vertical };
        cam.validate()?;
        Ok(cam)
    }

    /// 2.4 m range, 19×12 image mounted with the long axis vertical: 12 columns
    /// spanning 34.6° and 19 rows spanning 43.6°.
    pub fn depth_camera() -> Self {
        Self { max_range: T::lit(2.4), columns: 12, rows: 19, fov_horizontal: T::lit(34.6), fov_vertical: T::lit(43.6) }
    }

    pub fn validate(&self) -> Result<(), SensingError> {
        let deg180 = T::lit(180.0);
        if !(self.max_range > T::zero()) {
            return Err(SensingError::InvalidCamera("max_range must be > 0".into()));
        }
        if self.columns == 0 || self.rows == 0 {
            return Err(SensingError::InvalidCamera("resolution must be >= 1 in both axes".into()));
        }
        for fov in [self.fov_horizontal, self.fov_vertical] {
            if !(fov > T::zero() && fov < deg180) {
                return Err(SensingError::InvalidCamera(format!("field of view {fov} outside (0, 180)")));
            }
        }
        Ok(())
    }

    pub fn ray_count(&self) -> usize {
        self.columns * self.rows
    }

    /// Body-frame unit ray directions, row-major from the top-left pixel.
    ///
    /// Azimuth and elevation are spaced uniformly in angle through pixel centers.
    pub fn body_rays(&self) -> Vec<Vec3<T>> {
        let half = T::lit(0.5);
        let h = self.fov_horizontal.to_radians();
        let v = self.fov_vertical.to_radians();
        let cols = T::from_usize_lossy(self.columns);
        let rows = T::from_usize_lossy(self.rows);
        let mut out = Vec::with_capacity(self.ray_count());
        for r in 0..self.rows {
            let el = v * half - (T::from_usize_lossy(r) + half) * v / rows;
            for c in 0..self.columns {
                let az = h * half - (T::from_usize_lossy(c) + half) * h / cols;
                out.push(Vec3::new(el.cos() * az.cos(), el.cos() * az.sin(), el.sin()));
            }
        }
        out
    }

    /// World-frame ray directions for a heading.
    pub fn world_rays(&self, yaw: Yaw) -> Vec<Vec3<T>> {
        self.body_rays().into_iter().map(|d| yaw.rotate(d)).collect()
    }
}

/// Relative origin offset applied per axis before traversal, in units of the
/// resolution. Moves rays off cell edges and corners deterministically.
pub const ORIGIN_PERTURBATION: f64 = 1e-9;

/// Incremental voxel walk along a segment (Amanatides–Woo).
///
/// Yields linear cell indices in traversal order together with the ray
/// parameter at which each cell is entered. The walk starts in the cell
/// containing the perturbed origin and ends on leaving the lattice or when
/// the next boundary lies at or beyond `max_range`.
pub struct VoxelWalk<'g, T, C> {
    grid: &'g VoxelGrid3<T, C>,
    cell: [i64; 3],
    step: [i64; 3],
    t_max: [T; 3],
    t_delta: [T; 3],
    t_enter: T,
    max_range: T,
    done: bool,
}

impl<'g, T: Real, C> VoxelWalk<'g, T, C> {
    pub fn new(grid: &'g VoxelGrid3<T, C>, origin: Vec3<T>, direction: Vec3<T>, max_range: T) -> Self {
        let res = grid.resolution();
        let eps = res * T::lit(ORIGIN_PERTURBATION);
        let o = origin + Vec3::splat(eps);
        let mut walk = Self {
            grid,
            cell: [0; 3],
            step: [0; 3],
            t_max: [T::infinity(); 3],
            t_delta: [T::infinity(); 3],
            t_enter: T::zero(),
            max_range,
            done: true,
        };
        let Some(start) = grid.world_to_cell(o) else {
            return walk;
        };
        walk.done = false;
        for a in 0..3 {
            let c = start[a];
            walk.cell[a] = c as i64;
            let d = direction.axis(a);
            let p = o.axis(a);
            if d > T::zero() {
                walk.step[a] = 1;
                walk.t_max[a] = (T::from_usize_lossy(c + 1) * res - p) / d;
                walk.t_delta[a] = res / d;
            } else if d < T::zero() {
                walk.step[a] = -1;
                walk.t_max[a] = (T::from_usize_lossy(c) * res - p) / d;
                walk.t_delta[a] = -res / d;
            }
        }
        walk
    }
}

impl<T: Real, C> Iterator for VoxelWalk<'_, T, C> {
    type Item = (usize, T);

    fn next(&mut self) -> Option<(usize, T)> {
        if self.done {
            return None;
        }
        let c = self.cell;
        let out = (self.grid.index([c[0] as usize, c[1] as usize, c[2] as usize]), self.t_enter);

        // lowest axis wins ties
        let mut axis = 0;
        for a in 1..3 {
            if self.t_max[a] < self.t_max[axis] {
                axis = a;
            }
        }
        let t_next = self.t_max[axis];
        if !(t_next < self.max_range) {
            self.done = true;
        } else {
            self.cell[axis] += self.step[axis];
            if !self.grid.in_bounds(self.cell) {
                self.done = true;
            }
            self.t_enter = t_next;
            self.t_max[axis] += self.t_delta[axis];
        }
        Some(out)
    }
}

/// Cells traversed by one ray, truncated after the first occupied cell.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct RayTrace {
    pub cells: Vec<usize>,
    pub hit: bool,
}

pub fn cast_ray<T: Real>(env: &GroundTruthEnvironment<T>, origin: Vec3<T>, direction: Vec3<T>, max_range: T) -> RayTrace {
    debug_assert!((direction.norm() - T::one()).abs() < T::lit(1e-6), "direction must be a unit vector");
    let mut trace = RayTrace::default();
    for (cell, _) in VoxelWalk::new(&env.grid, origin, direction, max_range) {
        trace.cells.push(cell);
        if env.is_occupied(cell) {
            trace.hit = true;
            break;
        }
    }
    trace
}

/// The set of cells a camera at `state` reveals, sorted ascending.
pub fn camera_visible_set<T: Real>(state: &RobotState<T>, env: &GroundTruthEnvironment<T>, cam: &CameraModel<T>) -> Vec<usize> {
    let mut cells: Vec<usize> =
        cam.world_rays(state.yaw).into_iter().flat_map(|d| cast_ray(env, state.position, d, cam.max_range).cells).collect();
    cells.sort_unstable();
    cells.dedup();
    cells
}

/// Cell occupancies revealed by one camera frame.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct Observation {
    pub cells: Vec<(usize, bool)>,
}

impl Observation {
    pub fn len(&self) -> usize {
        self.cells.len()
    }

    pub fn is_empty(&self) -> bool {
        self.cells.is_empty()
    }
}

pub fn observe<T: Real>(state: &RobotState<T>, env: &GroundTruthEnvironment<T>, cam: &CameraModel<T>) -> Observation {
    Observation { cells: camera_visible_set(state, env, cam).into_iter().map(|c| (c, env.is_occupied(c))).collect() }
}

/// Marks observed cells known. Returns how many cells changed from unknown.
///
/// The belief is untouched if any observed cell contradicts existing knowledge.
pub fn fuse_observation<T: Real>(belief: &mut BeliefMap<T>, obs: &Observation) -> Result<usize, SensingError> {
    let n = belief.grid.len();
    for &(cell, occupied) in &obs.cells {
        if cell >= n {
            return Err(SensingError::OutOfBounds(cell));
        }
        let known = belief.knowledge(cell);
        let conflict = matches!((known, occupied), (CellKnowledge::KnownFree, true) | (CellKnowledge::KnownOccupied, false));
        if conflict {
            return Err(SensingError::Contradiction { cell, known, observed: occupied });
        }
    }
    let cells = belief.grid.cells_mut();
    let mut newly = 0;
    for &(cell, occupied) in &obs.cells {
        if cells[cell] == CellKnowledge::Unknown {
            newly += 1;
            cells[cell] = if occupied { CellKnowledge::KnownOccupied } else { CellKnowledge::KnownFree };
        }
    }
    Ok(newly)
}

/// Rays of one camera view traced through a belief map with every unknown
/// cell treated as free. Each ray ends at the lattice boundary, the range
/// limit, or just after a known-occupied cell.
///
/// Under any environment consistent with the belief, the cells a ray reveals
/// are a prefix of its list here: everything up to and including the first
/// occupied cell.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct ViewRays {
    offsets: Vec<u32>,
    cells: Vec<u32>,
}

impl ViewRays {
    pub fn trace<T: Real>(state: &RobotState<T>, belief: &BeliefMap<T>, cam: &CameraModel<T>) -> Self {
        let mut rays = ViewRays { offsets: vec![0], cells: Vec::new() };
        for d in cam.world_rays(state.yaw) {
            for (cell, _) in VoxelWalk::new(&belief.grid, state.position, d, cam.max_range) {
                rays.cells.push(cell as u32);
                if belief.knowledge(cell) == CellKnowledge::KnownOccupied {
                    break;
                }
            }
            rays.offsets.push(rays.cells.len() as u32);
        }
        rays
    }

    pub fn ray_count(&self) -> usize {
        self.offsets.len() - 1
    }

    pub fn ray(&self, i: usize) -> &[u32] {
        &self.cells[self.offsets[i] as usize..self.offsets[i + 1] as usize]
    }

    pub fn rays(&self) -> impl Iterator<Item = &[u32]> + '_ {
        (0..self.ray_count()).map(move |i| self.ray(i))
    }

    /// Every cell on any ray (with repetitions).
    pub fn all_cells(&self) -> &[u32] {
        &self.cells
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::generate_empty;

    fn empty(n: usize) -> GroundTruthEnvironment<f64> {
        generate_empty(Vec3::splat(n as f64 * 0.1), 0.1).unwrap()
    }

    #[test]
    fn axis_ray_one_meter_from_center() {
        let env = empty(20);
        let t = cast_ray(&env, Vec3::new(0.05, 0.05, 0.05), Vec3::new(1.0, 0.0, 0.0), 1.0);
        assert!(!t.hit);
        assert!(t.cells.len() == 10 || t.cells.len() == 11, "{}", t.cells.len());
        assert_eq!(t.cells[0], 0);
    }

    #[test]
    fn adjacent_blocker_stops_ray() {
        let mut env = empty(10);
        let idx = env.grid.index([3, 2, 2]);
        env.grid.cells_mut()[idx] = true;
        let t = cast_ray(&env, Vec3::new(0.25, 0.25, 0.25), Vec3::new(1.0, 0.0, 0.0), 2.0);
        assert!(t.hit);
        assert!(t.cells.len() <= 2);
        assert_eq!(*t.cells.last().unwrap(), idx);
    }

    #[test]
    fn zero_range_is_origin_cell() {
        let env = empty(10);
        let t = cast_ray(&env, Vec3::new(0.25, 0.35, 0.45), Vec3::new(0.0, 0.0, 1.0), 0.0);
        assert_eq!(t.cells, vec![env.grid.index([2, 3, 4])]);
    }

    #[test]
    fn origin_outside_grid_is_empty() {
        let env = empty(10);
        let t = cast_ray(&env, Vec3::new(-0.5, 0.5, 0.5), Vec3::new(1.0, 0.0, 0.0), 5.0);
        assert!(t.cells.is_empty() && !t.hit);
    }

    #[test]
    fn sealed_cavity_sees_only_neighbors() {
        let mut env = empty(5);
        for idx in 0..env.grid.len() {
            env.grid.cells_mut()[idx] = true;
        }
        let center = env.grid.index([2, 2, 2]);
        env.grid.cells_mut()[center] = false;
        let state = RobotState::new(Vec3::splat(0.25), Yaw::East);
        let seen = camera_visible_set(&state, &env, &CameraModel::depth_camera());
        assert!(seen.contains(&center));
        for c in seen {
            let cc = env.grid.coord(c);
            let manhattan: usize = (0..3).map(|a| cc[a].abs_diff(2)).sum();
            assert!(manhattan <= 1, "cell {cc:?} is not adjacent");
        }
    }

    #[test]
    fn visible_set_yaw_invariant_on_cube() {
        let env = empty(41);
        let cam = CameraModel::depth_camera();
        let p = env.grid.cell_to_world([20, 20, 20]);
        let counts: Vec<usize> = Yaw::ALL.iter().map(|&y| camera_visible_set(&RobotState::new(p, y), &env, &cam).len()).collect();
        assert!(counts.iter().all(|&c| c == counts[0]), "{counts:?}");
    }

    #[test]
    fn visible_set_within_range_ball() {
        let env = empty(60);
        let cam = CameraModel::depth_camera();
        let state = RobotState::new(Vec3::new(1.03, 3.01, 2.97), Yaw::West);
        let limit = cam.max_range + 0.1 * 3f64.sqrt();
        for c in camera_visible_set(&state, &env, &cam) {
            let d = (env.grid.cell_to_world(env.grid.coord(c)) - state.position).norm();
            assert!(d <= limit, "{d}");
        }
    }

    #[test]
    fn yaw_rotation_group() {
        let mut y = Yaw::South;
        for _ in 0..4 {
            y = y.turn_left();
        }
        assert_eq!(y, Yaw::South);
        assert_eq!(Yaw::North.turn_right(), Yaw::East);
        let v = Yaw::North.rotate(Vec3::new(1.0f64, 0.0, 0.0));
        assert_eq!(v, Vec3::new(0.0, 1.0, 0.0));
    }

    #[test]
    fn camera_validation() {
        assert!(CameraModel::new(0.0f64, 2, 2, 40.0, 40.0).is_err());
        assert!(CameraModel::new(1.0f64, 0, 2, 40.0, 40.0).is_err());
        assert!(CameraModel::new(1.0f64, 2, 2, 180.0, 40.0).is_err());
        assert!(CameraModel::<f64>::depth_camera().validate().is_ok());
        assert_eq!(CameraModel::<f64>::depth_camera().ray_count(), 228);
    }

    fn belief_for(env: &GroundTruthEnvironment<f64>) -> BeliefMap<f64> {
        BeliefMap::unknown_like(&env.grid, 0.2).unwrap()
    }

    #[test]
    fn fuse_is_idempotent_and_counts() {
        let env = empty(20);
        let mut b = belief_for(&env);
        let obs = observe(&RobotState::new(Vec3::splat(1.0), Yaw::East), &env, &CameraModel::depth_camera());
        let before = b.unknown_count();
        let newly = fuse_observation(&mut b, &obs).unwrap();
        assert_eq!(before - b.unknown_count(), newly);
        assert_eq!(newly, obs.len());
        let snapshot = b.clone();
        assert_eq!(fuse_observation(&mut b, &obs).unwrap(), 0);
        assert_eq!(b, snapshot);
        assert_eq!(fuse_observation(&mut b, &Observation::default()).unwrap(), 0);
        assert_eq!(b, snapshot);
    }

    #[test]
    fn fuse_rejects_contradiction_atomically() {
        let env = empty(4);
        let mut b = belief_for(&env);
        b.grid.cells_mut()[5] = CellKnowledge::KnownFree;
        let snapshot = b.clone();
        let obs = Observation { cells: vec![(1, false), (5, true)] };
        assert!(matches!(fuse_observation(&mut b, &obs), Err(SensingError::Contradiction { cell: 5, .. })));
        assert_eq!(b, snapshot);
    }

    #[test]
    fn view_rays_in_unknown_map_match_empty_env_rays() {
        let env = empty(30);
        let b = belief_for(&env);
        let cam = CameraModel::depth_camera();
        let s = RobotState::new(Vec3::new(1.52, 1.47, 1.5), Yaw::South);
        let rays = ViewRays::trace(&s, &b, &cam);
        let mut from_rays: Vec<usize> = rays.all_cells().iter().map(|&c| c as usize).collect();
        from_rays.sort_unstable();
        from_rays.dedup();
        assert_eq!(from_rays, camera_visible_set(&s, &env, &cam));
        assert_eq!(rays.ray_count(), 228);
    }
}
