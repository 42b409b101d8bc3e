use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{apply_dynamics, segment_is_safe, ControlInput, ControlSet, PlannerConfig};
use crate::grid::BeliefMap;
use crate::objectives::{RobotId, TrajectoryAction};
use crate::scalar::Real;
use crate::sensing::RobotState;

/// Result of one tree search.
#[derive(Debug, Clone, PartialEq)]
pub struct MctsOutcome<T> {
    /// Action along the most-visited chain.
    pub action: TrajectoryAction<T>,
    /// Reward of `action`.
    pub gain: T,
    /// Best reward among all evaluated trajectories (including `gain`).
    pub best_gain: T,
}

/// Yaw-left repeated over the horizon; safe whenever the robot's cell is known free.
pub fn stay_in_place<T: Real>(robot: RobotId, start: RobotState<T>, horizon: usize) -> TrajectoryAction<T> {
    TrajectoryAction::from_controls(robot, start, vec![ControlInput::YawLeft; horizon])
}

struct Node<T> {
    state: RobotState<T>,
    depth: usize,
    control: Option<ControlInput>,
    parent: Option<usize>,
    children: Vec<usize>,
    /// Safe controls not yet expanded, stored in reverse order for popping.
    untried: Vec<ControlInput>,
    visits: u32,
    total: T,
}

fn safe_controls<T: Real>(state: &RobotState<T>, belief: &BeliefMap<T>, controls: &ControlSet) -> Vec<ControlInput> {
    controls.iter().filter(|&u| segment_is_safe(belief, state.position, apply_dynamics(state, u).position)).collect()
}

/// UCT search over safe `horizon`-step control sequences maximizing `reward`.
///
/// Children are expanded in control-set order. Each sample descends by
/// `mean + c_p·sqrt(2 ln N / n)`, expands one child, completes the sequence
/// with uniformly random safe controls and backs up the reward of the full
/// trajectory. The answer follows the most-visited child from the root,
/// falling back to the first safe control where the tree is unexplored.
pub fn mcts_plan<T: Real>(
    robot: RobotId,
    start: RobotState<T>,
    belief: &BeliefMap<T>,
    cfg: &PlannerConfig<T>,
    seed: u64,
    reward: &mut dyn FnMut(&TrajectoryAction<T>) -> T,
) -> MctsOutcome<T> {
    let horizon = cfg.horizon;
    let root_safe = safe_controls(&start, belief, &cfg.controls);
    if root_safe.is_empty() {
        let action = stay_in_place(robot, start, horizon);
        let gain = reward(&action);
        return MctsOutcome { action, gain, best_gain: gain };
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut nodes = vec![Node {
        state: start,
        depth: 0,
        control: None,
        parent: None,
        children: Vec::new(),
        untried: root_safe.into_iter().rev().collect(),
        visits: 0,
        total: T::zero(),
    }];
    let mut best_gain = T::neg_infinity();
    let two = T::lit(2.0);

    for _ in 0..cfg.mcts_samples {
        // selection
        let mut id = 0;
        while nodes[id].untried.is_empty() && !nodes[id].children.is_empty() && nodes[id].depth < horizon {
            let parent_log = T::from_u32(nodes[id].visits.max(1)).unwrap().ln();
            let mut best = nodes[id].children[0];
            let mut best_score = T::neg_infinity();
            for &c in &nodes[id].children {
                let n = T::from_u32(nodes[c].visits).unwrap();
                let score = nodes[c].total / n + cfg.c_p * (two * parent_log / n).sqrt();
                if score > best_score {
                    best_score = score;
                    best = c;
                }
            }
            id = best;
        }
        // expansion
        if nodes[id].depth < horizon {
            if let Some(u) = nodes[id].untried.pop() {
                let state = apply_dynamics(&nodes[id].state, u);
                let depth = nodes[id].depth + 1;
                let untried =
                    if depth < horizon { safe_controls(&state, belief, &cfg.controls).into_iter().rev().collect() } else { Vec::new() };
                nodes.push(Node {
                    state,
                    depth,
                    control: Some(u),
                    parent: Some(id),
                    children: Vec::new(),
                    untried,
                    visits: 0,
                    total: T::zero(),
                });
                let child = nodes.len() - 1;
                nodes[id].children.push(child);
                id = child;
            }
        }
        // rollout
        let mut controls = Vec::with_capacity(horizon);
        let mut up = Some(id);
        while let Some(n) = up {
            if let Some(u) = nodes[n].control {
                controls.push(u);
            }
            up = nodes[n].parent;
        }
        controls.reverse();
        let mut state = nodes[id].state;
        while controls.len() < horizon {
            let safe = safe_controls(&state, belief, &cfg.controls);
            let u = if safe.is_empty() { ControlInput::YawLeft } else { safe[rng.gen_range(0..safe.len())] };
            state = apply_dynamics(&state, u);
            controls.push(u);
        }
        let r = reward(&TrajectoryAction::from_controls(robot, start, controls));
        if r > best_gain {
            best_gain = r;
        }
        // backpropagation
        let mut up = Some(id);
        while let Some(n) = up {
            nodes[n].visits += 1;
            nodes[n].total += r;
            up = nodes[n].parent;
        }
    }

    let mut controls = Vec::with_capacity(horizon);
    let mut id = Some(0);
    let mut state = start;
    while controls.len() < horizon {
        let next = id.and_then(|n| {
            let mut best: Option<usize> = None;
            for &c in &nodes[n].children {
                if best.is_none_or(|b| nodes[c].visits > nodes[b].visits) {
                    best = Some(c);
                }
            }
            best
        });
        let u = match next {
            Some(c) => nodes[c].control.unwrap(),
            None => safe_controls(&state, belief, &cfg.controls).first().copied().unwrap_or(ControlInput::YawLeft),
        };
        id = next;
        state = apply_dynamics(&state, u);
        controls.push(u);
    }
    let action = TrajectoryAction::from_controls(robot, start, controls);
    let gain = reward(&action);
    MctsOutcome { action, gain, best_gain: best_gain.max(gain) }
}
