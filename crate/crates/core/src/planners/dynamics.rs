use serde::{Deserialize, Serialize};

use crate::grid::{BeliefMap, CellKnowledge};
use crate::objectives::TrajectoryAction;
use crate::scalar::{Real, Vec3};
use crate::sensing::{RobotState, VoxelWalk};

/// Translation length of one motion primitive in meters.
pub const TRANSLATION_STEP: f64 = 0.3;

/// Body-frame motion primitive.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum ControlInput {
    Forward,
    Back,
    Left,
    Right,
    Up,
    Down,
    YawLeft,
    YawRight,
}

impl ControlInput {
    pub fn is_yaw(self) -> bool {
        matches!(self, ControlInput::YawLeft | ControlInput::YawRight)
    }

    /// Body-frame translation direction, zero for yaw controls.
    fn body_direction<T: Real>(self) -> Vec3<T> {
        let (o, z) = (T::one(), T::zero());
        match self {
            ControlInput::Forward => Vec3::new(o, z, z),
            ControlInput::Back => Vec3::new(-o, z, z),
            ControlInput::Left => Vec3::new(z, o, z),
            ControlInput::Right => Vec3::new(z, -o, z),
            ControlInput::Up => Vec3::new(z, z, o),
            ControlInput::Down => Vec3::new(z, z, -o),
            ControlInput::YawLeft | ControlInput::YawRight => Vec3::splat(z),
        }
    }
}

/// Ordered set of controls available at every step. The order is the
/// tie-break order used by the planners.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ControlSet(pub Vec<ControlInput>);

impl ControlSet {
    /// Forward, back, up, down and both yaws.
    pub fn standard() -> Self {
        use ControlInput::*;
        Self(vec![Forward, Back, Up, Down, YawLeft, YawRight])
    }

    /// [`ControlSet::standard`] plus lateral translations.
    pub fn with_lateral() -> Self {
        use ControlInput::*;
        Self(vec![Forward, Back, Left, Right, Up, Down, YawLeft, YawRight])
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = ControlInput> + '_ {
        self.0.iter().copied()
    }
}

impl Default for ControlSet {
    fn default() -> Self {
        Self::standard()
    }
}

pub fn apply_dynamics<T: Real>(state: &RobotState<T>, u: ControlInput) -> RobotState<T> {
    match u {
        ControlInput::YawLeft => RobotState::new(state.position, state.yaw.turn_left()),
        ControlInput::YawRight => RobotState::new(state.position, state.yaw.turn_right()),
        _ => {
            let step = state.yaw.rotate(u.body_direction::<T>()) * T::lit(TRANSLATION_STEP);
            RobotState::new(state.position + step, state.yaw)
        }
    }
}

/// Cells swept by the straight segment `from -> to`, in traversal order.
///
/// Empty if `from` is outside the lattice.
pub fn swept_cells<T: Real, C>(grid: &crate::grid::VoxelGrid3<T, C>, from: Vec3<T>, to: Vec3<T>) -> Vec<usize> {
    let delta = to - from;
    let len = delta.norm();
    let dir = if len > T::zero() { delta * (T::one() / len) } else { Vec3::new(T::one(), T::zero(), T::zero()) };
    VoxelWalk::new(grid, from, dir, len).map(|(c, _)| c).collect()
}

/// Whether the segment between two positions stays in known-free space.
pub fn segment_is_safe<T: Real>(belief: &BeliefMap<T>, from: Vec3<T>, to: Vec3<T>) -> bool {
    if belief.grid.world_to_cell(to).is_none() {
        return false;
    }
    let cells = swept_cells(&belief.grid, from, to);
    !cells.is_empty() && cells.iter().all(|&c| belief.knowledge(c) == CellKnowledge::KnownFree)
}

/// Every motion segment of the trajectory (and its start) lies in known-free cells.
pub fn is_safe<T: Real>(traj: &TrajectoryAction<T>, belief: &BeliefMap<T>) -> bool {
    let states = traj.states();
    if !segment_is_safe(belief, states[0].position, states[0].position) {
        return false;
    }
    states.windows(2).all(|w| segment_is_safe(belief, w[0].position, w[1].position))
}
