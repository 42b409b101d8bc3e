//! Single-robot tree search and the multi-robot coordinators built on it.

mod coordinators;
mod dynamics;
mod mcts;
mod solver;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use coordinators::{myopic_plan, rsp_plan, rsp_rounds, sequential_greedy, Execution};
pub use dynamics::{apply_dynamics, is_safe, segment_is_safe, swept_cells, ControlInput, ControlSet, TRANSLATION_STEP};
pub use mcts::{mcts_plan, stay_in_place, MctsOutcome};
pub use solver::{BlockSolution, BlockSolver, MctsSolver, MenuSolver};

use crate::scalar::Real;

#[derive(Debug, Error, PartialEq)]
pub enum PlannerError {
    #[error("invalid planner config: {0}")]
    InvalidConfig(String),
}

/// How robots share decisions.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Coordinator {
    /// Every robot ignores the others.
    Myopic,
    /// Robots plan in index order, each conditioned on all earlier choices.
    Sequential,
    /// Randomized sequential partitions over `rounds` planning rounds.
    Rsp { rounds: usize },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlannerConfig<T> {
    pub horizon: usize,
    pub mcts_samples: usize,
    /// UCT exploration constant in reward units.
    pub c_p: T,
    pub controls: ControlSet,
    pub coordinator: Coordinator,
}

impl<T: Real> PlannerConfig<T> {
    pub fn validate(&self) -> Result<(), PlannerError> {
        let bad = |m: &str| Err(PlannerError::InvalidConfig(m.into()));
        if self.horizon == 0 {
            return bad("horizon must be at least 1");
        }
        if self.mcts_samples == 0 {
            return bad("mcts_samples must be at least 1");
        }
        if self.c_p.is_nan() || self.c_p < T::zero() {
            return bad("c_p must be non-negative");
        }
        if self.controls.is_empty() {
            return bad("control set is empty");
        }
        if let Coordinator::Rsp { rounds: 0 } = self.coordinator {
            return bad("RSP needs at least one round");
        }
        Ok(())
    }
}
