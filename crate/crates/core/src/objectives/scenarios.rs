//! Environment distributions as weighted lists of scenarios.
//!
//! A scenario only needs to answer "is this unknown cell occupied"; known
//! cells always follow the belief.

use std::collections::HashMap;

use crate::grid::{sample_environment, BeliefMap, CellKnowledge};
use crate::scalar::{derive_seed, Real};

use super::ObjectiveError;

/// Hard cap on the number of cells an exact enumeration may range over.
pub const MAX_ENUMERATION_CELLS: usize = 20;

#[derive(Debug, Clone)]
pub(crate) enum Scenarios<T> {
    /// Every unknown cell free, probability one.
    Optimistic,
    /// Independent draws from the belief, equally weighted.
    Sampled(Vec<Vec<bool>>),
    /// Every instantiation of a fixed list of unknown cells. Scenario `s`
    /// marks the cell in slot `b` occupied iff bit `b` of `s` is set.
    Enumerated { slots: HashMap<u32, u32>, probs: Vec<T> },
}

impl<T: Real> Scenarios<T> {
    pub fn sampled(belief: &BeliefMap<T>, samples: usize, seed: u64) -> Self {
        let draws = (0..samples as u64).map(|s| sample_environment(belief, derive_seed(seed, &[s])).grid.cells().to_vec()).collect();
        Scenarios::Sampled(draws)
    }

    /// Enumerates the unknown cells among `cells` (duplicates and known cells ignored).
    pub fn enumerated(belief: &BeliefMap<T>, cells: impl IntoIterator<Item = u32>, limit: usize) -> Result<Self, ObjectiveError> {
        let mut unknown: Vec<u32> = cells.into_iter().filter(|&c| belief.knowledge(c as usize) == CellKnowledge::Unknown).collect();
        unknown.sort_unstable();
        unknown.dedup();
        let limit = limit.min(MAX_ENUMERATION_CELLS);
        if unknown.len() > limit {
            return Err(ObjectiveError::EnumerationLimit { cells: unknown.len(), limit });
        }
        let p = belief.occupancy_prior();
        let q = T::one() - p;
        let n = unknown.len();
        let probs = (0u64..1 << n)
            .map(|mask| {
                let occupied = mask.count_ones() as i32;
                p.powi(occupied) * q.powi(n as i32 - occupied)
            })
            .collect();
        let slots = unknown.iter().enumerate().map(|(b, &c)| (c, b as u32)).collect();
        Ok(Scenarios::Enumerated { slots, probs })
    }

    pub fn len(&self) -> usize {
        match self {
            Scenarios::Optimistic => 1,
            Scenarios::Sampled(d) => d.len(),
            Scenarios::Enumerated { probs, .. } => probs.len(),
        }
    }

    pub fn weight(&self, s: usize) -> T {
        match self {
            Scenarios::Optimistic => T::one(),
            Scenarios::Sampled(d) => T::one() / T::from_usize_lossy(d.len()),
            Scenarios::Enumerated { probs, .. } => probs[s],
        }
    }

    /// Occupancy of an unknown cell in scenario `s`.
    #[inline]
    pub fn blocked(&self, s: usize, cell: u32) -> bool {
        match self {
            Scenarios::Optimistic => false,
            Scenarios::Sampled(d) => d[s][cell as usize],
            Scenarios::Enumerated { slots, .. } => {
                let slot = slots.get(&cell).unwrap_or_else(|| panic!("unknown cell {cell} is outside the enumerated set"));
                (s >> slot) & 1 == 1
            }
        }
    }

    pub fn is_enumerated(&self) -> bool {
        matches!(self, Scenarios::Enumerated { .. })
    }
}
