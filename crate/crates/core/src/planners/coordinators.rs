use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use super::{BlockSolution, BlockSolver};
use crate::objectives::{Assignment, RobotId, TrajectoryAction};
use crate::scalar::Real;

/// Whether robots of one planning round are solved on the rayon pool.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Execution {
    Serial,
    Parallel,
}

/// Solves every robot of one round against the same conditioning set.
fn plan_round<T: Real, S: BlockSolver<T>>(
    solver: &S,
    robots: &[RobotId],
    conditioning: &[&TrajectoryAction<T>],
    exec: Execution,
) -> Vec<Option<BlockSolution<T>>> {
    match exec {
        Execution::Serial => robots.iter().map(|&r| solver.solve(r, conditioning)).collect(),
        Execution::Parallel => robots.par_iter().map(|&r| solver.solve(r, conditioning)).collect(),
    }
}

/// Runs rounds in order; each round conditions on every earlier round.
fn plan_rounds<T: Real, S: BlockSolver<T>>(solver: &S, rounds: &[Vec<RobotId>], exec: Execution) -> Assignment<T> {
    let mut chosen = Assignment::new();
    for round in rounds {
        let solutions = {
            let conditioning = chosen.refs();
            plan_round(solver, round, &conditioning, exec)
        };
        for sol in solutions.into_iter().flatten() {
            chosen.insert(sol.action).expect("each robot plans once");
        }
    }
    chosen
}

/// Robots plan one at a time in `order`, each conditioned on all earlier choices.
pub fn sequential_greedy<T: Real, S: BlockSolver<T>>(solver: &S, order: &[RobotId]) -> Assignment<T> {
    let rounds: Vec<Vec<RobotId>> = order.iter().map(|&r| vec![r]).collect();
    plan_rounds(solver, &rounds, Execution::Serial)
}

/// Every robot conditions on the empty set.
pub fn myopic_plan<T: Real, S: BlockSolver<T>>(solver: &S, robots: &[RobotId], exec: Execution) -> Assignment<T> {
    plan_rounds(solver, &[robots.to_vec()], exec)
}

/// Round index in `0..n_d` for each robot, drawn uniformly and independently.
pub fn rsp_rounds(robot_count: usize, n_d: usize, seed: u64) -> Vec<usize> {
    assert!(n_d >= 1, "RSP needs at least one round");
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..robot_count).map(|_| rng.gen_range(0..n_d)).collect()
}

/// Randomized sequential partitions: robots draw rounds via [`rsp_rounds`]
/// (indexed by position in `robots`); same-round robots plan in parallel
/// conditioned only on earlier rounds.
pub fn rsp_plan<T: Real, S: BlockSolver<T>>(solver: &S, robots: &[RobotId], n_d: usize, seed: u64, exec: Execution) -> Assignment<T> {
    let assigned = rsp_rounds(robots.len(), n_d, seed);
    let mut rounds = vec![Vec::new(); n_d];
    for (&r, &k) in robots.iter().zip(&assigned) {
        rounds[k].push(r);
    }
    plan_rounds(solver, &rounds, exec)
}
