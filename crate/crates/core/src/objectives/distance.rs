//! Informative-view sampling and the distance-to-nearest-view reward.

use std::collections::VecDeque;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::TrajectoryAction;
use crate::grid::{BeliefMap, CellKnowledge, VoxelGrid3};
use crate::scalar::{Real, Vec3};
use crate::sensing::{CameraModel, RobotState, ViewRays, Yaw};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DistanceRewardConfig<T> {
    /// Minimum single-view optimistic coverage (cells) for a view to count as informative.
    pub view_threshold: T,
    /// Reward for closing the full distance to the nearest informative view.
    pub distance_factor: T,
    pub view_sample_count: usize,
    pub sample_seed: u64,
}

/// Number of unknown cells a single view would reveal if all unknown space were free.
pub fn single_view_coverage<T: Real>(state: &RobotState<T>, belief: &BeliefMap<T>, cam: &CameraModel<T>) -> usize {
    let rays = ViewRays::trace(state, belief, cam);
    let mut cells: Vec<u32> =
        rays.all_cells().iter().copied().filter(|&c| belief.knowledge(c as usize) == CellKnowledge::Unknown).collect();
    cells.sort_unstable();
    cells.dedup();
    cells.len()
}

/// Samples views at known-free cell centers and keeps the informative ones.
pub fn sample_informative_views<T: Real>(belief: &BeliefMap<T>, cam: &CameraModel<T>, cfg: &DistanceRewardConfig<T>) -> Vec<RobotState<T>> {
    let free: Vec<usize> = (0..belief.grid.len()).filter(|&c| belief.knowledge(c) == CellKnowledge::KnownFree).collect();
    if free.is_empty() {
        return Vec::new();
    }
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.sample_seed);
    let mut kept = Vec::new();
    for _ in 0..cfg.view_sample_count {
        let cell = free[rng.gen_range(0..free.len())];
        let yaw = Yaw::ALL[rng.gen_range(0..4)];
        let state = RobotState::new(belief.grid.cell_to_world(belief.grid.coord(cell)), yaw);
        if T::from_usize_lossy(single_view_coverage(&state, belief, cam)) >= cfg.view_threshold {
            kept.push(state);
        }
    }
    kept
}

/// Lattice distance in meters to the nearest goal view; infinite where unreachable.
#[derive(Debug, Clone, PartialEq)]
pub struct DistanceField<T> {
    pub grid: VoxelGrid3<T, T>,
}

impl<T: Real> DistanceField<T> {
    /// Field with no goals: infinite everywhere.
    pub fn unreachable<C>(like: &VoxelGrid3<T, C>) -> Self {
        Self { grid: like.map(|_| T::infinity()) }
    }

    pub fn at(&self, position: Vec3<T>) -> T {
        self.grid.world_to_index(position).map_or(T::infinity(), |i| self.grid.cells()[i])
    }

    pub fn is_unreachable(&self) -> bool {
        self.grid.cells().iter().all(|d| d.is_infinite())
    }
}

/// Multi-source breadth-first search over 6-connected known-free cells.
pub fn distance_field<T: Real>(belief: &BeliefMap<T>, goals: &[RobotState<T>]) -> DistanceField<T> {
    let mut field = DistanceField::unreachable(&belief.grid);
    let res = belief.grid.resolution();
    let mut hops = vec![u32::MAX; belief.grid.len()];
    let mut queue = VecDeque::new();
    for g in goals {
        if let Some(c) = belief.grid.world_to_index(g.position) {
            if belief.knowledge(c) == CellKnowledge::KnownFree && hops[c] == u32::MAX {
                hops[c] = 0;
                queue.push_back(c);
            }
        }
    }
    while let Some(c) = queue.pop_front() {
        let h = hops[c] + 1;
        for n in belief.grid.neighbors6(c) {
            if hops[n] == u32::MAX && belief.knowledge(n) == CellKnowledge::KnownFree {
                hops[n] = h;
                queue.push_back(n);
            }
        }
    }
    for (d, &h) in field.grid.cells_mut().iter_mut().zip(&hops) {
        if h != u32::MAX {
            *d = T::from_u32(h).unwrap() * res;
        }
    }
    field
}

/// `α · max(0, d₀ − min_l d_l) / max(d₀, resolution)`; zero when the start is unreachable.
pub fn distance_reward<T: Real>(action: &TrajectoryAction<T>, field: &DistanceField<T>, alpha: T) -> T {
    let states = action.states();
    let d0 = field.at(states[0].position);
    if !d0.is_finite() {
        return T::zero();
    }
    let dmin = states.iter().map(|s| field.at(s.position)).fold(d0, T::min);
    let progress = (d0 - dmin).max(T::zero());
    alpha * progress / d0.max(field.grid.resolution())
}
