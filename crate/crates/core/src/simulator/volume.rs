use std::collections::{HashSet, VecDeque};

use rayon::prelude::*;

use crate::grid::{BeliefMap, CellKnowledge, GroundTruthEnvironment};
use crate::planners::{segment_is_safe, TRANSLATION_STEP};
use crate::scalar::Vec3;
use crate::sensing::{camera_visible_set, CameraModel, RobotState, Yaw};

/// The belief a robot would hold after seeing everything.
pub fn fully_known(env: &GroundTruthEnvironment<f64>) -> BeliefMap<f64> {
    let grid = env.grid.map(|&occ| if occ { CellKnowledge::KnownOccupied } else { CellKnowledge::KnownFree });
    BeliefMap::new(grid, 0.5).expect("0.5 is a valid prior")
}

/// Positions reachable from `start` by safe translations on the motion
/// lattice, assuming the whole map is known.
pub fn reachable_positions(env: &GroundTruthEnvironment<f64>, start: Vec3<f64>) -> Vec<Vec3<f64>> {
    let known = fully_known(env);
    if !segment_is_safe(&known, start, start) {
        return Vec::new();
    }
    let at = |k: [i32; 3]| start + Vec3::new(k[0] as f64, k[1] as f64, k[2] as f64) * TRANSLATION_STEP;
    let mut seen = HashSet::from([[0i32; 3]]);
    let mut queue = VecDeque::from([[0i32; 3]]);
    let mut out = Vec::new();
    while let Some(k) = queue.pop_front() {
        out.push(at(k));
        for axis in 0..3 {
            for step in [-1, 1] {
                let mut n = k;
                n[axis] += step;
                if !seen.contains(&n) && segment_is_safe(&known, at(k), at(n)) {
                    seen.insert(n);
                    queue.push_back(n);
                }
            }
        }
    }
    out
}

/// Number of cells observable from any position reachable from one of
/// `starts`, at any heading. No team can cover more than this.
pub fn exploration_volume(env: &GroundTruthEnvironment<f64>, starts: &[Vec3<f64>], cam: &CameraModel<f64>) -> usize {
    let positions: Vec<Vec3<f64>> = starts.iter().flat_map(|&s| reachable_positions(env, s)).collect();
    let seen = positions
        .par_iter()
        .fold(
            || vec![false; env.grid.len()],
            |mut seen, &p| {
                for yaw in Yaw::ALL {
                    for c in camera_visible_set(&RobotState::new(p, yaw), env, cam) {
                        seen[c] = true;
                    }
                }
                seen
            },
        )
        .reduce(
            || vec![false; env.grid.len()],
            |mut a, b| {
                a.iter_mut().zip(b).for_each(|(x, y)| *x |= y);
                a
            },
        );
    seen.iter().filter(|&&s| s).count()
}
