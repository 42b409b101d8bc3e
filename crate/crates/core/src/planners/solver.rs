use super::{mcts_plan, PlannerConfig};
use crate::objectives::{ExplorationObjective, RobotId, SetObjective, TrajectoryAction};
use crate::scalar::{derive_seed, Real};
use crate::sensing::RobotState;

#[derive(Debug, Clone, PartialEq)]
pub struct BlockSolution<T> {
    pub action: TrajectoryAction<T>,
    /// Marginal gain of `action` given the conditioning set.
    pub gain: T,
    /// Largest marginal gain the solver saw in the block; an exact block
    /// maximum when the solver is exact.
    pub best_gain: T,
}

/// Maximizes the marginal gain over one robot's block of the ground set.
pub trait BlockSolver<T: Real>: Sync {
    /// `None` when the robot has no actions.
    fn solve(&self, robot: RobotId, conditioning: &[&TrajectoryAction<T>]) -> Option<BlockSolution<T>>;

    fn is_exact(&self) -> bool;
}

/// Exhaustive argmax over explicit per-robot action menus; ties go to the
/// earliest menu entry.
pub struct MenuSolver<'o, T, O: ?Sized> {
    objective: &'o O,
    menus: Vec<Vec<TrajectoryAction<T>>>,
}

impl<'o, T: Real, O: SetObjective<T> + ?Sized> MenuSolver<'o, T, O> {
    /// `menus[r]` is the block of robot `r`.
    pub fn new(objective: &'o O, menus: Vec<Vec<TrajectoryAction<T>>>) -> Self {
        Self { objective, menus }
    }

    pub fn menus(&self) -> &[Vec<TrajectoryAction<T>>] {
        &self.menus
    }
}

impl<T: Real, O: SetObjective<T> + ?Sized> BlockSolver<T> for MenuSolver<'_, T, O> {
    fn solve(&self, robot: RobotId, conditioning: &[&TrajectoryAction<T>]) -> Option<BlockSolution<T>> {
        let menu = self.menus.get(robot).filter(|m| !m.is_empty())?;
        let refs: Vec<&TrajectoryAction<T>> = menu.iter().collect();
        let gains = self.objective.marginals(&refs, conditioning);
        let mut best = 0;
        for (i, g) in gains.iter().enumerate() {
            if *g > gains[best] {
                best = i;
            }
        }
        Some(BlockSolution { action: menu[best].clone(), gain: gains[best], best_gain: gains[best] })
    }

    fn is_exact(&self) -> bool {
        true
    }
}

/// Tree search from each robot's current state. Robot `r` searches with a
/// seed derived from `(seed, r)`, so results do not depend on planning order.
pub struct MctsSolver<'o, 'a, T: Real> {
    objective: &'o ExplorationObjective<'a, T>,
    starts: Vec<RobotState<T>>,
    cfg: PlannerConfig<T>,
    seed: u64,
}

impl<'o, 'a, T: Real> MctsSolver<'o, 'a, T> {
    /// `starts[r]` is the current state of robot `r`.
    pub fn new(objective: &'o ExplorationObjective<'a, T>, starts: Vec<RobotState<T>>, cfg: PlannerConfig<T>, seed: u64) -> Self {
        Self { objective, starts, cfg, seed }
    }
}

impl<T: Real> BlockSolver<T> for MctsSolver<'_, '_, T> {
    fn solve(&self, robot: RobotId, conditioning: &[&TrajectoryAction<T>]) -> Option<BlockSolution<T>> {
        let start = *self.starts.get(robot)?;
        let mut cond = self.objective.condition(conditioning);
        let out =
            mcts_plan(robot, start, self.objective.belief(), &self.cfg, derive_seed(self.seed, &[robot as u64]), &mut |a| cond.marginal(a));
        Some(BlockSolution { action: out.action, gain: out.gain, best_gain: out.best_gain })
    }

    fn is_exact(&self) -> bool {
        false
    }
}
