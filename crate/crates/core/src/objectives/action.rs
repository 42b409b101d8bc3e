use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::planners::{apply_dynamics, ControlInput};
use crate::scalar::Real;
use crate::sensing::RobotState;

/// Robot identity; also the index of its block in the partition matroid.
pub type RobotId = usize;

/// One ground-set element: a robot and an L-step control sequence, with the
/// forward-simulated states cached.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrajectoryAction<T> {
    robot: RobotId,
    controls: Vec<ControlInput>,
    states: Vec<RobotState<T>>,
}

impl<T: Real> TrajectoryAction<T> {
    pub fn from_controls(robot: RobotId, start: RobotState<T>, controls: Vec<ControlInput>) -> Self {
        let mut states = Vec::with_capacity(controls.len() + 1);
        states.push(start);
        for &u in &controls {
            let next = apply_dynamics(states.last().unwrap(), u);
            states.push(next);
        }
        Self { robot, controls, states }
    }

    pub fn robot(&self) -> RobotId {
        self.robot
    }

    pub fn controls(&self) -> &[ControlInput] {
        &self.controls
    }

    /// `states()[0]` is the current state; `states()[l]` follows `controls()[l - 1]`.
    pub fn states(&self) -> &[RobotState<T>] {
        &self.states
    }

    /// The states visited in the future, paired with their step `l >= 1`.
    pub fn future_states(&self) -> impl Iterator<Item = (usize, &RobotState<T>)> + '_ {
        self.states.iter().enumerate().skip(1)
    }

    pub fn horizon(&self) -> usize {
        self.controls.len()
    }
}

#[derive(Debug, Error, PartialEq, Eq)]
#[error("robot {0} already has an action in this assignment")]
pub struct DuplicateRobot(pub RobotId);

/// Independent set of the partition matroid: at most one action per robot.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct Assignment<T> {
    actions: Vec<TrajectoryAction<T>>,
}

impl<T: Real> Assignment<T> {
    pub fn new() -> Self {
        Self { actions: Vec::new() }
    }

    pub fn insert(&mut self, action: TrajectoryAction<T>) -> Result<(), DuplicateRobot> {
        if self.get(action.robot()).is_some() {
            return Err(DuplicateRobot(action.robot()));
        }
        self.actions.push(action);
        Ok(())
    }

    pub fn get(&self, robot: RobotId) -> Option<&TrajectoryAction<T>> {
        self.actions.iter().find(|a| a.robot() == robot)
    }

    pub fn len(&self) -> usize {
        self.actions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.actions.is_empty()
    }

    pub fn actions(&self) -> &[TrajectoryAction<T>] {
        &self.actions
    }

    /// Borrowed view for objective evaluation.
    pub fn refs(&self) -> Vec<&TrajectoryAction<T>> {
        self.actions.iter().collect()
    }

    /// Actions sorted by robot id.
    pub fn into_sorted(mut self) -> Vec<TrajectoryAction<T>> {
        self.actions.sort_by_key(|a| a.robot());
        self.actions
    }
}
