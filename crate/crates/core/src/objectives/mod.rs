//! Volumetric rewards over sets of trajectory actions.

mod action;
mod distance;
mod exploration;
mod scenarios;

use std::collections::{BTreeMap, HashMap};

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use action::{Assignment, DuplicateRobot, RobotId, TrajectoryAction};
pub use distance::{distance_field, distance_reward, sample_informative_views, single_view_coverage, DistanceField, DistanceRewardConfig};
pub use exploration::{Conditioned, ExplorationObjective, SetObjective};
pub use scenarios::MAX_ENUMERATION_CELLS;

use crate::grid::{BeliefMap, CellKnowledge, GroundTruthEnvironment};
use crate::scalar::{binary_entropy, Real};
use crate::sensing::{camera_visible_set, CameraModel, ViewRays};

#[derive(Debug, Error, PartialEq)]
pub enum ObjectiveError {
    #[error("{cells} unknown cells exceed the enumeration limit of {limit}")]
    EnumerationLimit { cells: usize, limit: usize },
    #[error("invalid objective spec: {0}")]
    InvalidSpec(String),
    #[error("operation requires ray_sum = {expected}")]
    ModeMismatch { expected: bool },
}

/// Per-cell weight scheme.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Weighting {
    /// Each unknown cell weighs 1.
    UnitNewCell,
    /// Each unknown cell weighs its occupancy entropy in bits.
    Entropy,
    /// Entropy divided by the prior's entropy, so unknown cells weigh 1.
    ScaledEntropy,
}

impl Weighting {
    pub fn unknown_weight<T: Real>(self, prior: T) -> T {
        match self {
            Weighting::UnitNewCell | Weighting::ScaledEntropy => T::one(),
            Weighting::Entropy => binary_entropy(prior),
        }
    }
}

/// Which distribution over environments the expectation is taken under.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum EnvMode {
    /// All unknown cells free.
    Optimistic,
    /// Average over environments drawn from the belief; the same draws are
    /// reused for every evaluation through one objective instance.
    MonteCarlo { samples: usize, seed: u64 },
    /// Exact expectation by enumerating the relevant unknown cells.
    Exact { enumeration_limit: usize },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ObjectiveSpec<T> {
    pub weighting: Weighting,
    pub env_mode: EnvMode,
    /// Per-step survival factor γ in (0, 1].
    pub discount: T,
    /// Sum rays independently instead of counting each cell once.
    pub ray_sum: bool,
}

impl<T: Real> ObjectiveSpec<T> {
    /// Unit-weight optimistic coverage, undiscounted.
    pub fn optimistic() -> Self {
        Self { weighting: Weighting::UnitNewCell, env_mode: EnvMode::Optimistic, discount: T::one(), ray_sum: false }
    }

    pub fn exact(weighting: Weighting) -> Self {
        Self { weighting, env_mode: EnvMode::Exact { enumeration_limit: MAX_ENUMERATION_CELLS }, discount: T::one(), ray_sum: false }
    }

    pub fn with_discount(self, discount: T) -> Self {
        Self { discount, ..self }
    }

    pub fn validate(&self) -> Result<(), ObjectiveError> {
        if !(self.discount > T::zero() && self.discount <= T::one()) {
            return Err(ObjectiveError::InvalidSpec(format!("discount {} outside (0, 1]", self.discount)));
        }
        if let EnvMode::MonteCarlo { samples: 0, .. } = self.env_mode {
            return Err(ObjectiveError::InvalidSpec("Monte-Carlo mode needs at least one sample".into()));
        }
        Ok(())
    }
}

/// Cells seen from every future state of every action.
pub fn covered_cells<T: Real>(set: &[&TrajectoryAction<T>], env: &GroundTruthEnvironment<T>, cam: &CameraModel<T>) -> Vec<usize> {
    let mut cells = Vec::new();
    for a in set {
        for (_, s) in a.future_states() {
            cells.extend(camera_visible_set(s, env, cam));
        }
    }
    cells.sort_unstable();
    cells.dedup();
    cells
}

/// Undiscounted expected weighted coverage.
pub fn expected_coverage<T: Real>(
    set: &[&TrajectoryAction<T>],
    belief: &BeliefMap<T>,
    spec: &ObjectiveSpec<T>,
    cam: &CameraModel<T>,
) -> Result<T, ObjectiveError> {
    if spec.ray_sum {
        return Err(ObjectiveError::ModeMismatch { expected: false });
    }
    let spec = spec.with_discount(T::one());
    Ok(ExplorationObjective::for_ground_set(belief, cam, spec, set)?.view_value(set))
}

/// Undiscounted per-ray expected coverage summed over all rays and views.
pub fn ray_sum_information<T: Real>(
    set: &[&TrajectoryAction<T>],
    belief: &BeliefMap<T>,
    spec: &ObjectiveSpec<T>,
    cam: &CameraModel<T>,
) -> Result<T, ObjectiveError> {
    if !spec.ray_sum {
        return Err(ObjectiveError::ModeMismatch { expected: true });
    }
    let spec = spec.with_discount(T::one());
    Ok(ExplorationObjective::new(belief, cam, spec)?.view_value(set))
}

/// Mutual information in bits between the environment and the noiseless
/// observations of every future view in `set`, computed as the entropy of the
/// observation by enumerating every instantiation of the reachable unknown cells.
pub fn noiseless_mutual_information<T: Real>(
    set: &[&TrajectoryAction<T>],
    belief: &BeliefMap<T>,
    cam: &CameraModel<T>,
    enumeration_limit: usize,
) -> Result<T, ObjectiveError> {
    let views: Vec<ViewRays> = set.iter().flat_map(|a| a.future_states().map(|(_, s)| ViewRays::trace(s, belief, cam))).collect();
    let mut unknown: Vec<u32> = views
        .iter()
        .flat_map(|v| v.all_cells().iter().copied())
        .filter(|&c| belief.knowledge(c as usize) == CellKnowledge::Unknown)
        .collect();
    unknown.sort_unstable();
    unknown.dedup();
    let limit = enumeration_limit.min(MAX_ENUMERATION_CELLS);
    if unknown.len() > limit {
        return Err(ObjectiveError::EnumerationLimit { cells: unknown.len(), limit });
    }
    let slot: HashMap<u32, u32> = unknown.iter().enumerate().map(|(b, &c)| (c, b as u32)).collect();
    let p = belief.occupancy_prior();
    let n = unknown.len();

    // Observation outcome: which unknown cells were seen, and which of those were occupied.
    let mut outcome_prob: BTreeMap<(u32, u32), T> = BTreeMap::new();
    for env in 0u32..(1 << n) {
        let mut seen = 0u32;
        for v in &views {
            for ray in v.rays() {
                for &c in ray {
                    if let Some(&b) = slot.get(&c) {
                        seen |= 1 << b;
                        if env >> b & 1 == 1 {
                            break;
                        }
                    }
                }
            }
        }
        let occupied = env.count_ones() as i32;
        let prob = p.powi(occupied) * (T::one() - p).powi(n as i32 - occupied);
        *outcome_prob.entry((seen, env & seen)).or_insert(T::zero()) += prob;
    }
    let mut h = T::zero();
    for &q in outcome_prob.values() {
        if q > T::zero() {
            h -= q * q.log2();
        }
    }
    Ok(h)
}

/// `f_view(X) + Σ_r f_dist(X_r)` with the view reward discounted by `γ^l`.
pub fn combined_objective<T: Real>(
    set: &[&TrajectoryAction<T>],
    belief: &BeliefMap<T>,
    spec: &ObjectiveSpec<T>,
    cam: &CameraModel<T>,
    dist_cfg: &DistanceRewardConfig<T>,
) -> Result<T, ObjectiveError> {
    let goals = sample_informative_views(belief, cam, dist_cfg);
    let field = distance_field(belief, &goals);
    let obj = ExplorationObjective::for_ground_set(belief, cam, *spec, set)?.with_distance(&field, dist_cfg.distance_factor);
    Ok(obj.value(set))
}
