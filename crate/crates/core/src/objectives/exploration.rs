use std::collections::BTreeMap;
use std::sync::Arc;

use dashmap::DashMap;

use super::distance::{distance_reward, DistanceField};
use super::scenarios::Scenarios;
use super::{EnvMode, ObjectiveError, ObjectiveSpec, RobotId, TrajectoryAction};
use crate::grid::{BeliefMap, CellKnowledge};
use crate::scalar::Real;
use crate::sensing::{CameraModel, RobotState, ViewRays};

/// A normalized set function over trajectory actions.
pub trait SetObjective<T: Real>: Sync {
    fn value(&self, set: &[&TrajectoryAction<T>]) -> T;

    /// `f(x | set) = f(set ∪ {x}) − f(set)`.
    fn marginal(&self, x: &TrajectoryAction<T>, set: &[&TrajectoryAction<T>]) -> T {
        let mut with = set.to_vec();
        with.push(x);
        self.value(&with) - self.value(set)
    }

    /// Marginal gain of each candidate with respect to the same set.
    fn marginals(&self, candidates: &[&TrajectoryAction<T>], set: &[&TrajectoryAction<T>]) -> Vec<T> {
        candidates.iter().map(|x| self.marginal(x, set)).collect()
    }
}

#[derive(Debug, Clone, Copy)]
struct DistanceTerm<'a, T> {
    field: &'a DistanceField<T>,
    alpha: T,
}

type StateKey = (i64, i64, i64, u8);

/// View reward plus per-robot distance reward over one belief snapshot.
///
/// Unknown cells carry the weighting's per-cell weight; known cells weigh
/// zero. In coverage mode a cell counts once, discounted by `γ^l` for the
/// earliest step `l` that reveals it. In ray-sum mode every ray of every
/// view contributes its own expectation, so shared cells count repeatedly.
///
/// The distance term for a robot is the largest distance reward among that
/// robot's actions in the set, which keeps the sum monotone and submodular
/// on arbitrary subsets of the ground set.
pub struct ExplorationObjective<'a, T: Real> {
    belief: &'a BeliefMap<T>,
    camera: &'a CameraModel<T>,
    spec: ObjectiveSpec<T>,
    scenarios: Scenarios<T>,
    unknown_weight: T,
    distance: Option<DistanceTerm<'a, T>>,
    cache: DashMap<StateKey, Arc<View>>,
}

/// Rays of one view plus its distinct unknown cells.
struct View {
    rays: ViewRays,
    unknown: Vec<u32>,
}

impl<'a, T: Real> ExplorationObjective<'a, T> {
    /// Exact mode enumerates every unknown cell of the belief.
    pub fn new(belief: &'a BeliefMap<T>, camera: &'a CameraModel<T>, spec: ObjectiveSpec<T>) -> Result<Self, ObjectiveError> {
        Self::build(belief, camera, spec, |_| {
            Ok((0..belief.grid.len() as u32).filter(|&c| belief.knowledge(c as usize) == CellKnowledge::Unknown).collect())
        })
    }

    /// Exact mode enumerates only the unknown cells some view of `ground` can reach.
    pub fn for_ground_set(
        belief: &'a BeliefMap<T>,
        camera: &'a CameraModel<T>,
        spec: ObjectiveSpec<T>,
        ground: &[&TrajectoryAction<T>],
    ) -> Result<Self, ObjectiveError> {
        Self::build(belief, camera, spec, |obj| {
            let mut cells = Vec::new();
            for a in ground {
                for (_, s) in a.future_states() {
                    cells.extend_from_slice(&obj.view(s).unknown);
                }
            }
            Ok(cells)
        })
    }

    fn build(
        belief: &'a BeliefMap<T>,
        camera: &'a CameraModel<T>,
        spec: ObjectiveSpec<T>,
        exact_cells: impl FnOnce(&Self) -> Result<Vec<u32>, ObjectiveError>,
    ) -> Result<Self, ObjectiveError> {
        spec.validate()?;
        let scenarios = match spec.env_mode {
            EnvMode::Optimistic | EnvMode::Exact { .. } => Scenarios::Optimistic,
            EnvMode::MonteCarlo { samples, seed } => Scenarios::sampled(belief, samples, seed),
        };
        let mut obj = Self {
            belief,
            camera,
            unknown_weight: spec.weighting.unknown_weight(belief.occupancy_prior()),
            spec,
            scenarios,
            distance: None,
            cache: DashMap::new(),
        };
        if let EnvMode::Exact { enumeration_limit } = obj.spec.env_mode {
            if !obj.spec.ray_sum {
                let cells = exact_cells(&obj)?;
                obj.scenarios = Scenarios::enumerated(belief, cells, enumeration_limit)?;
            }
        }
        Ok(obj)
    }

    pub fn with_distance(mut self, field: &'a DistanceField<T>, alpha: T) -> Self {
        self.distance = Some(DistanceTerm { field, alpha });
        self
    }

    pub fn spec(&self) -> &ObjectiveSpec<T> {
        &self.spec
    }

    pub fn belief(&self) -> &'a BeliefMap<T> {
        self.belief
    }

    pub fn camera(&self) -> &'a CameraModel<T> {
        self.camera
    }

    /// Rays of the view from `state` through the belief.
    pub fn view_rays(&self, state: &RobotState<T>) -> ViewRays {
        self.view(state).rays.clone()
    }

    /// Memoized per state.
    fn view(&self, state: &RobotState<T>) -> Arc<View> {
        let key = self.state_key(state);
        if let Some(r) = self.cache.get(&key) {
            return Arc::clone(&r);
        }
        let rays = ViewRays::trace(state, self.belief, self.camera);
        let mut unknown: Vec<u32> =
            rays.all_cells().iter().copied().filter(|&c| self.belief.knowledge(c as usize) == CellKnowledge::Unknown).collect();
        unknown.sort_unstable();
        unknown.dedup();
        let view = Arc::new(View { rays, unknown });
        self.cache.entry(key).or_insert(view).clone()
    }

    fn state_key(&self, s: &RobotState<T>) -> StateKey {
        // 1e-4 of a cell: coarse enough to merge float drift along lattice paths
        let q = self.belief.grid.resolution() * T::lit(1e-4);
        let k = |v: T| (v / q).round().to_i64().unwrap_or(i64::MAX);
        (k(s.position.x), k(s.position.y), k(s.position.z), s.yaw.quarter_turns())
    }

    /// `(γ^l, rays)` for every future state of every action.
    fn views(&self, set: &[&TrajectoryAction<T>]) -> Vec<(T, Arc<View>)> {
        let mut out = Vec::new();
        for a in set {
            for (l, s) in a.future_states() {
                out.push((self.spec.discount.powi(l as i32), self.view(s)));
            }
        }
        out
    }

    /// Volumetric part of the objective.
    pub fn view_value(&self, set: &[&TrajectoryAction<T>]) -> T {
        let views = self.views(set);
        if self.spec.ray_sum {
            return views.iter().map(|(f, rays)| *f * self.ray_sum_view(rays)).sum();
        }
        let mut marks = Marks::new(self.belief.grid.len());
        self.expected_view_coverage(&views, &mut marks)
    }

    fn expected_view_coverage(&self, views: &[(T, Arc<View>)], marks: &mut Marks<T>) -> T {
        let mut total = T::zero();
        for s in 0..self.scenarios.len() {
            marks.clear();
            self.mark_views(s, views, marks);
            total += self.scenarios.weight(s) * marks.sum();
        }
        total * self.unknown_weight
    }

    /// Records the best discount factor per unknown cell revealed in scenario `s`.
    fn mark_views(&self, s: usize, views: &[(T, Arc<View>)], marks: &mut Marks<T>) {
        if let Scenarios::Optimistic = self.scenarios {
            for (factor, view) in views {
                for &c in &view.unknown {
                    marks.raise(c, *factor);
                }
            }
            return;
        }
        for (factor, view) in views {
            for ray in view.rays.rays() {
                for &c in ray {
                    if self.belief.knowledge(c as usize) == CellKnowledge::Unknown {
                        marks.raise(c, *factor);
                        if self.scenarios.blocked(s, c) {
                            break;
                        }
                    }
                }
            }
        }
    }

    /// Per-ray expected weighted coverage summed over the rays of one view.
    fn ray_sum_view(&self, view: &View) -> T {
        let q = match self.spec.env_mode {
            EnvMode::Optimistic => T::zero(),
            _ => self.belief.occupancy_prior(),
        };
        let pass = T::one() - q;
        let mut total = T::zero();
        for ray in view.rays.rays() {
            let mut survive = T::one();
            for &c in ray {
                if self.belief.knowledge(c as usize) == CellKnowledge::Unknown {
                    total += survive;
                    survive *= pass;
                }
            }
        }
        total * self.unknown_weight
    }

    /// Additive distance part of the objective.
    pub fn distance_value(&self, set: &[&TrajectoryAction<T>]) -> T {
        self.best_distance_per_robot(set).values().copied().sum()
    }

    fn best_distance_per_robot(&self, set: &[&TrajectoryAction<T>]) -> BTreeMap<RobotId, T> {
        let mut best = BTreeMap::new();
        if let Some(d) = &self.distance {
            for a in set {
                let r = distance_reward(a, d.field, d.alpha);
                let e = best.entry(a.robot()).or_insert(T::zero());
                if r > *e {
                    *e = r;
                }
            }
        }
        best
    }

    fn distance_of(&self, a: &TrajectoryAction<T>) -> T {
        self.distance.as_ref().map_or(T::zero(), |d| distance_reward(a, d.field, d.alpha))
    }

    /// Precomputes the coverage state of `set` for fast marginal gains.
    pub fn condition(&self, set: &[&TrajectoryAction<T>]) -> Conditioned<'_, 'a, T> {
        let views = self.views(set);
        let n = self.belief.grid.len();
        let mut marks = Marks::new(n);
        let mut credits = Credits::new(n, self.scenarios.len());
        let mut base_view = T::zero();
        if !self.spec.ray_sum {
            if self.scenarios.is_enumerated() {
                base_view = self.expected_view_coverage(&views, &mut marks);
            } else {
                for s in 0..self.scenarios.len() {
                    marks.clear();
                    self.mark_views(s, &views, &mut marks);
                    for &c in &marks.touched {
                        credits.set(c, s, marks.val[c as usize]);
                    }
                }
            }
        }
        Conditioned { objective: self, views, credits, base_view, best_distance: self.best_distance_per_robot(set), marks }
    }
}

impl<T: Real> SetObjective<T> for ExplorationObjective<'_, T> {
    fn value(&self, set: &[&TrajectoryAction<T>]) -> T {
        self.view_value(set) + self.distance_value(set)
    }

    fn marginal(&self, x: &TrajectoryAction<T>, set: &[&TrajectoryAction<T>]) -> T {
        self.condition(set).marginal(x)
    }

    fn marginals(&self, candidates: &[&TrajectoryAction<T>], set: &[&TrajectoryAction<T>]) -> Vec<T> {
        let mut c = self.condition(set);
        candidates.iter().map(|x| c.marginal(x)).collect()
    }
}

/// Objective conditioned on a fixed set of prior decisions.
pub struct Conditioned<'o, 'a, T: Real> {
    objective: &'o ExplorationObjective<'a, T>,
    views: Vec<(T, Arc<View>)>,
    credits: Credits<T>,
    base_view: T,
    best_distance: BTreeMap<RobotId, T>,
    marks: Marks<T>,
}

impl<T: Real> Conditioned<'_, '_, T> {
    pub fn objective_value(&self) -> T {
        let dist: T = self.best_distance.values().copied().sum();
        let view = if self.objective.spec.ray_sum {
            self.views.iter().map(|(f, r)| *f * self.objective.ray_sum_view(r)).sum()
        } else if self.objective.scenarios.is_enumerated() {
            self.base_view
        } else {
            let o = self.objective;
            let mut total = T::zero();
            for s in 0..o.scenarios.len() {
                total += o.scenarios.weight(s) * self.credits.scenario_sum(s);
            }
            total * o.unknown_weight
        };
        view + dist
    }

    /// `f(x | conditioning set)`.
    pub fn marginal(&mut self, x: &TrajectoryAction<T>) -> T {
        let o = self.objective;
        let dist = {
            let prior = self.best_distance.get(&x.robot()).copied().unwrap_or(T::zero());
            (o.distance_of(x) - prior).max(T::zero())
        };
        let xviews = o.views(&[x]);
        let view = if o.spec.ray_sum {
            xviews.iter().map(|(f, r)| *f * o.ray_sum_view(r)).sum()
        } else if o.scenarios.is_enumerated() {
            let mut all = self.views.clone();
            all.extend(xviews);
            (o.expected_view_coverage(&all, &mut self.marks) - self.base_view).max(T::zero())
        } else {
            let mut total = T::zero();
            for s in 0..o.scenarios.len() {
                self.marks.clear();
                o.mark_views(s, &xviews, &mut self.marks);
                let mut gain = T::zero();
                for &c in &self.marks.touched {
                    let d = self.marks.val[c as usize] - self.credits.get(c, s);
                    if d > T::zero() {
                        gain += d;
                    }
                }
                total += o.scenarios.weight(s) * gain;
            }
            total * o.unknown_weight
        };
        view + dist
    }
}

/// Sparse max-accumulator over a dense cell array.
struct Marks<T> {
    val: Vec<T>,
    touched: Vec<u32>,
}

impl<T: Real> Marks<T> {
    fn new(n: usize) -> Self {
        Self { val: vec![T::zero(); n], touched: Vec::new() }
    }

    #[inline]
    fn raise(&mut self, c: u32, v: T) {
        let slot = &mut self.val[c as usize];
        if *slot == T::zero() {
            self.touched.push(c);
        }
        if v > *slot {
            *slot = v;
        }
    }

    fn clear(&mut self) {
        for &c in &self.touched {
            self.val[c as usize] = T::zero();
        }
        self.touched.clear();
    }

    fn sum(&self) -> T {
        self.touched.iter().map(|&c| self.val[c as usize]).sum()
    }
}

/// Discount credit already earned per (cell, scenario), stored only for cells
/// the conditioning set reaches.
struct Credits<T> {
    slot: Vec<u32>,
    scenarios: usize,
    table: Vec<T>,
}

impl<T: Real> Credits<T> {
    fn new(cells: usize, scenarios: usize) -> Self {
        Self { slot: vec![u32::MAX; cells], scenarios, table: Vec::new() }
    }

    fn set(&mut self, cell: u32, s: usize, v: T) {
        let mut k = self.slot[cell as usize];
        if k == u32::MAX {
            k = (self.table.len() / self.scenarios) as u32;
            self.slot[cell as usize] = k;
            self.table.resize(self.table.len() + self.scenarios, T::zero());
        }
        self.table[k as usize * self.scenarios + s] = v;
    }

    #[inline]
    fn get(&self, cell: u32, s: usize) -> T {
        match self.slot[cell as usize] {
            u32::MAX => T::zero(),
            k => self.table[k as usize * self.scenarios + s],
        }
    }

    fn scenario_sum(&self, s: usize) -> T {
        self.table.iter().skip(s).step_by(self.scenarios).copied().sum()
    }
}
