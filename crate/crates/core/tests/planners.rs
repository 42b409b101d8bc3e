#![allow(clippy::needless_range_loop)]

use std::collections::BTreeSet;

use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use volex_core::grid::{BeliefMap, CellKnowledge, VoxelGrid3};
use volex_core::objectives::{Assignment, ExplorationObjective, ObjectiveSpec, SetObjective, TrajectoryAction, Weighting};
use volex_core::planners::ControlInput::{self, *};
use volex_core::planners::{
    is_safe, mcts_plan, myopic_plan, rsp_plan, rsp_rounds, segment_is_safe, sequential_greedy, stay_in_place, swept_cells, BlockSolver,
    ControlSet, Coordinator, Execution, MctsSolver, MenuSolver, PlannerConfig,
};
use volex_core::sensing::{CameraModel, RobotState, Yaw};
use volex_core::verify::TinyInstance;
use volex_core::Vec3;

fn belief(dims: [usize; 3], fill: CellKnowledge) -> BeliefMap<f64> {
    BeliefMap::new(VoxelGrid3::new(dims, 0.1, fill).unwrap(), 0.125).unwrap()
}

fn set_cell(b: &mut BeliefMap<f64>, c: [usize; 3], k: CellKnowledge) {
    let i = b.grid.index(c);
    b.grid.cells_mut()[i] = k;
}

/// Cells whose open box the segment passes through, by slab clipping.
fn overlap_oracle(b: &BeliefMap<f64>, from: Vec3<f64>, to: Vec3<f64>) -> BTreeSet<usize> {
    let res = b.grid.resolution();
    let d = to - from;
    let mut out = BTreeSet::new();
    for i in 0..b.grid.len() {
        let c = b.grid.coord(i);
        let (mut lo, mut hi) = (0.0f64, 1.0f64);
        for a in 0..3 {
            let (min, max) = (c[a] as f64 * res, (c[a] + 1) as f64 * res);
            let (p, v) = (from.axis(a), d.axis(a));
            if v == 0.0 {
                if p <= min || p >= max {
                    hi = -1.0;
                }
            } else {
                let (t0, t1) = ((min - p) / v, (max - p) / v);
                lo = lo.max(t0.min(t1));
                hi = hi.min(t0.max(t1));
            }
        }
        if lo < hi || (lo == hi && d.norm() == 0.0) {
            out.insert(i);
        }
    }
    out
}

fn planner(horizon: usize, samples: usize, c_p: f64, controls: ControlSet) -> PlannerConfig<f64> {
    PlannerConfig { horizon, mcts_samples: samples, c_p, controls, coordinator: Coordinator::Sequential }
}

#[test]
fn yaw_only_trajectory_in_free_cell_is_safe() {
    let mut b = belief([3, 3, 3], CellKnowledge::Unknown);
    set_cell(&mut b, [1, 1, 1], CellKnowledge::KnownFree);
    let s = RobotState::new(b.grid.cell_to_world([1, 1, 1]), Yaw::East);
    assert!(is_safe(&stay_in_place(0, s, 5), &b));
    assert!(is_safe(&TrajectoryAction::from_controls(0, s, vec![YawRight, YawLeft, YawLeft]), &b));
}

#[test]
fn entering_unknown_space_is_unsafe() {
    let mut b = belief([10, 3, 3], CellKnowledge::KnownFree);
    set_cell(&mut b, [3, 1, 1], CellKnowledge::Unknown);
    let s = RobotState::new(b.grid.cell_to_world([1, 1, 1]), Yaw::East);
    // 0.3 m from the center of cell 1 ends in cell 4, crossing cell 3
    let a = TrajectoryAction::from_controls(0, s, vec![Forward]);
    assert!(!is_safe(&a, &b));
    let west = RobotState::new(b.grid.cell_to_world([6, 1, 1]), Yaw::East);
    assert!(is_safe(&TrajectoryAction::from_controls(0, west, vec![Forward]), &b));
}

#[test]
fn leaving_the_map_is_unsafe() {
    let b = belief([4, 3, 3], CellKnowledge::KnownFree);
    let s = RobotState::new(b.grid.cell_to_world([2, 1, 1]), Yaw::East);
    assert!(!segment_is_safe(&b, s.position, s.position + Vec3::new(0.3, 0.0, 0.0)));
}

#[test]
fn corridor_safety_matches_swept_cell_oracle() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    for _ in 0..200 {
        let mut b = belief([12, 3, 3], CellKnowledge::KnownOccupied);
        for x in 0..12 {
            let k = if rng.gen_bool(0.85) { CellKnowledge::KnownFree } else { CellKnowledge::Unknown };
            set_cell(&mut b, [x, 1, 1], k);
        }
        let x0 = rng.gen_range(0.0..1.2);
        let x1 = rng.gen_range(0.0..1.2);
        let (from, to) = (Vec3::new(x0, 0.15, 0.15), Vec3::new(x1, 0.15, 0.15));
        let oracle = overlap_oracle(&b, from, to);
        let swept: BTreeSet<usize> = swept_cells(&b.grid, from, to).into_iter().collect();
        assert_eq!(swept, oracle, "{x0} -> {x1}");
        let all_free = oracle.iter().all(|&c| b.knowledge(c) == CellKnowledge::KnownFree);
        assert_eq!(segment_is_safe(&b, from, to), all_free);
    }
}

proptest! {
    #[test]
    fn swept_cells_match_slab_oracle(
        a in prop::array::uniform3(0.001f64..0.599),
        c in prop::array::uniform3(0.001f64..0.599),
    ) {
        let b = belief([6, 6, 6], CellKnowledge::KnownFree);
        let (from, to) = (Vec3::from_f64(a), Vec3::from_f64(c));
        let swept = swept_cells(&b.grid, from, to);
        let unique: BTreeSet<usize> = swept.iter().copied().collect();
        prop_assert_eq!(unique.len(), swept.len());
        prop_assert_eq!(unique, overlap_oracle(&b, from, to));
    }
}

#[test]
fn forced_move_is_returned() {
    // one cell high corridor: only forward is ever safe
    let b = belief([12, 1, 1], CellKnowledge::KnownFree);
    let s = RobotState::new(b.grid.cell_to_world([0, 0, 0]), Yaw::East);
    let cfg = planner(3, 50, 1.0, ControlSet(vec![Up, Forward, Down]));
    let out = mcts_plan(0, s, &b, &cfg, 9, &mut |a| a.states().last().unwrap().position.x);
    assert_eq!(out.action.controls(), &[Forward, Forward, Forward]);
    assert_eq!(out.gain, out.best_gain);
}

#[test]
fn no_safe_control_stays_in_place() {
    let b = belief([1, 1, 1], CellKnowledge::KnownFree);
    let s = RobotState::new(b.grid.cell_to_world([0, 0, 0]), Yaw::East);
    let cfg = planner(4, 50, 1.0, ControlSet(vec![Forward, Up]));
    let out = mcts_plan(2, s, &b, &cfg, 1, &mut |_| 1.0);
    assert_eq!(out.action, stay_in_place(2, s, 4));
}

fn all_sequences(controls: &[ControlInput], horizon: usize) -> Vec<Vec<ControlInput>> {
    (0..horizon).fold(vec![Vec::new()], |acc, _| {
        acc.into_iter().flat_map(|p| controls.iter().map(move |&u| [p.clone(), vec![u]].concat())).collect()
    })
}

#[test]
fn large_budget_finds_exact_argmax_on_tiny_tree() {
    let controls = ControlSet::standard();
    for seed in 0..10u64 {
        let b = belief([12, 12, 12], CellKnowledge::KnownFree);
        let s = RobotState::new(b.grid.cell_to_world([6, 6, 6]), Yaw::ALL[seed as usize % 4]);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let table: Vec<f64> = (0..64).map(|_| rng.gen()).collect();
        let score = |a: &TrajectoryAction<f64>| -> f64 {
            let k = a.controls().iter().fold(0usize, |h, &u| h * 8 + controls.0.iter().position(|&c| c == u).unwrap());
            table[k]
        };
        let best = all_sequences(&controls.0, 2)
            .into_iter()
            .map(|u| TrajectoryAction::from_controls(0, s, u))
            .filter(|a| is_safe(a, &b))
            .map(|a| score(&a))
            .fold(f64::NEG_INFINITY, f64::max);
        let cfg = planner(2, 200_000, 1.0, controls.clone());
        let out = mcts_plan(0, s, &b, &cfg, seed, &mut |a| score(a));
        assert_eq!(out.gain, best, "seed {seed}");
        assert_eq!(out.best_gain, best);
    }
}

#[test]
fn exact_argmax_of_coverage_on_tiny_tree() {
    let mut b = belief([20, 20, 10], CellKnowledge::Unknown);
    let start = [4, 12, 5];
    for x in 2..7 {
        for z in 3..8 {
            set_cell(&mut b, [x, start[1], z], CellKnowledge::KnownFree);
        }
    }
    let cam = CameraModel::depth_camera();
    let obj = ExplorationObjective::new(&b, &cam, ObjectiveSpec::optimistic().with_discount(0.7)).unwrap();
    let s = RobotState::new(b.grid.cell_to_world(start), Yaw::East);
    let controls = ControlSet::standard();
    let best = all_sequences(&controls.0, 2)
        .into_iter()
        .map(|u| TrajectoryAction::from_controls(0, s, u))
        .filter(|a| is_safe(a, &b))
        .map(|a| obj.value(&[&a]))
        .fold(f64::NEG_INFINITY, f64::max);
    let cfg = planner(2, 3000, best / 2.0, controls);
    let out = mcts_plan(0, s, &b, &cfg, 4, &mut |a| obj.value(&[a]));
    assert!(is_safe(&out.action, &b));
    assert_eq!(out.gain, best);
}

#[test]
fn tree_search_is_deterministic_per_seed() {
    let inst = TinyInstance::random(8, 1, 1, 1);
    let obj = ExplorationObjective::new(&inst.belief, &inst.camera, ObjectiveSpec::optimistic().with_discount(0.7)).unwrap();
    let s = inst.menus[0][0].states()[0];
    let cfg = planner(4, 300, 2.0, ControlSet::with_lateral());
    let run = |seed| mcts_plan(0, s, &inst.belief, &cfg, seed, &mut |a| obj.value(&[a]));
    assert_eq!(run(17), run(17));
    assert!(is_safe(&run(17).action, &inst.belief));
}

fn exact_objective(inst: &TinyInstance) -> ExplorationObjective<'_, f64> {
    ExplorationObjective::for_ground_set(&inst.belief, &inst.camera, ObjectiveSpec::exact(Weighting::Entropy), &inst.ground_set()).unwrap()
}

fn robots(n: usize) -> Vec<usize> {
    (0..n).collect()
}

#[test]
fn single_robot_sequential_equals_myopic() {
    for seed in 0..20 {
        let inst = TinyInstance::random(seed, 1, 5, 3);
        let obj = exact_objective(&inst);
        let solver = MenuSolver::new(&obj, inst.menus.clone());
        assert_eq!(sequential_greedy(&solver, &[0]), myopic_plan(&solver, &[0], Execution::Serial));
    }
}

fn brute_force_opt(obj: &dyn SetObjective<f64>, menus: &[Vec<TrajectoryAction<f64>>]) -> f64 {
    fn go(obj: &dyn SetObjective<f64>, menus: &[Vec<TrajectoryAction<f64>>], set: &mut Vec<TrajectoryAction<f64>>) -> f64 {
        let Some((first, rest)) = menus.split_first() else {
            return obj.value(&set.iter().collect::<Vec<_>>());
        };
        let mut best = f64::NEG_INFINITY;
        for a in first {
            set.push(a.clone());
            best = best.max(go(obj, rest, set));
            set.pop();
        }
        best
    }
    go(obj, menus, &mut Vec::new())
}

#[test]
fn two_robot_greedy_is_within_half_of_optimum() {
    for seed in 0..40 {
        let inst = TinyInstance::random(seed, 2, 6, 3);
        let obj = exact_objective(&inst);
        let solver = MenuSolver::new(&obj, inst.menus.clone());
        let x = sequential_greedy(&solver, &[0, 1]);
        let opt = brute_force_opt(&obj, &inst.menus);
        assert!(obj.value(&x.refs()) >= 0.5 * opt - 1e-9, "seed {seed}");
    }
}

/// Two robots at one spot. `shared` looks east into open space; `west` looks
/// at the nearby wall of the map and sees less.
fn overlap_instance() -> (BeliefMap<f64>, CameraModel<f64>, Vec<Vec<TrajectoryAction<f64>>>) {
    let mut b = belief([25, 20, 10], CellKnowledge::Unknown);
    set_cell(&mut b, [3, 10, 5], CellKnowledge::KnownFree);
    let s = RobotState::new(b.grid.cell_to_world([3, 10, 5]), Yaw::East);
    let shared = |r| TrajectoryAction::from_controls(r, s, vec![YawLeft, YawRight]);
    let west = TrajectoryAction::from_controls(1, s, vec![YawLeft, YawLeft]);
    (b, CameraModel::depth_camera(), vec![vec![shared(0)], vec![shared(1), west]])
}

#[test]
fn later_robot_avoids_duplicating_an_earlier_view() {
    let (b, cam, menus) = overlap_instance();
    let obj = ExplorationObjective::new(&b, &cam, ObjectiveSpec::optimistic()).unwrap();
    let (dup, west) = (&menus[1][0], &menus[1][1]);
    assert!(obj.value(&[dup]) > obj.value(&[west]));
    assert_eq!(obj.marginal(dup, &[&menus[0][0]]), 0.0);
    assert!(obj.marginal(west, &[&menus[0][0]]) > 0.0);
    let solver = MenuSolver::new(&obj, menus.clone());
    let seq = sequential_greedy(&solver, &[0, 1]);
    assert_eq!(seq.get(1), Some(west));
    let myo = myopic_plan(&solver, &[0, 1], Execution::Serial);
    assert_eq!(myo.get(1), Some(dup));
    assert!(obj.value(&myo.refs()) <= obj.value(&seq.refs()));
}

#[test]
fn myopic_choices_ignore_robot_order() {
    for seed in 0..20 {
        let inst = TinyInstance::random(seed, 3, 4, 3);
        let obj = exact_objective(&inst);
        let solver = MenuSolver::new(&obj, inst.menus.clone());
        let a = myopic_plan(&solver, &[0, 1, 2], Execution::Serial);
        let b = myopic_plan(&solver, &[2, 0, 1], Execution::Parallel);
        assert_eq!(a.into_sorted(), b.into_sorted());
    }
}

#[test]
fn myopic_never_beats_sequential_on_overlap() {
    let (b, cam, menus) = overlap_instance();
    let obj = ExplorationObjective::new(&b, &cam, ObjectiveSpec::optimistic()).unwrap();
    let solver = MenuSolver::new(&obj, menus);
    let seq = sequential_greedy(&solver, &[0, 1]);
    let myo = myopic_plan(&solver, &[0, 1], Execution::Serial);
    assert!(obj.value(&myo.refs()) < obj.value(&seq.refs()));
}

fn sorted(a: Assignment<f64>) -> Vec<TrajectoryAction<f64>> {
    a.into_sorted()
}

/// Checks all three RSP equalities with `solver` over one seed.
fn check_rsp_equalities<S: BlockSolver<f64>>(solver: &S, n: usize, seed: u64) {
    let rs = robots(n);
    assert_eq!(sorted(rsp_plan(solver, &rs, 1, seed, Execution::Parallel)), sorted(myopic_plan(solver, &rs, Execution::Serial)));
    for n_d in 1..=n + 1 {
        assert_eq!(
            sorted(rsp_plan(solver, &rs, n_d, seed, Execution::Serial)),
            sorted(rsp_plan(solver, &rs, n_d, seed, Execution::Parallel))
        );
    }
    let distinct_seed = (seed..).find(|&s| {
        let r = rsp_rounds(n, n, s);
        r.iter().collect::<BTreeSet<_>>().len() == n
    });
    let ds = distinct_seed.unwrap();
    let rounds = rsp_rounds(n, n, ds);
    let mut order = rs.clone();
    order.sort_by_key(|&r| rounds[r]);
    assert_eq!(sorted(rsp_plan(solver, &rs, n, ds, Execution::Parallel)), sorted(sequential_greedy(solver, &order)));
}

#[test]
fn rsp_degenerate_cases_with_exhaustive_blocks() {
    for seed in 0..20 {
        let inst = TinyInstance::random(seed, 3, 5, 3);
        let obj = exact_objective(&inst);
        check_rsp_equalities(&MenuSolver::new(&obj, inst.menus.clone()), 3, seed);
    }
}

#[test]
fn rsp_degenerate_cases_with_tree_search() {
    for seed in 0..5 {
        let inst = TinyInstance::random(100 + seed, 3, 1, 1);
        let obj = ExplorationObjective::new(&inst.belief, &inst.camera, ObjectiveSpec::optimistic().with_discount(0.7)).unwrap();
        let starts = inst.menus.iter().map(|m| m[0].states()[0]).collect();
        let solver = MctsSolver::new(&obj, starts, planner(3, 60, 2.0, ControlSet::with_lateral()), seed);
        check_rsp_equalities(&solver, 3, seed);
    }
}

#[test]
fn rsp_rounds_are_seeded_and_in_range() {
    assert_eq!(rsp_rounds(16, 4, 9), rsp_rounds(16, 4, 9));
    assert!(rsp_rounds(16, 4, 9).iter().all(|&k| k < 4));
    assert!(rsp_rounds(5, 1, 3).iter().all(|&k| k == 0));
}
