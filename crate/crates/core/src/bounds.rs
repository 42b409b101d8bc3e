//! Online and oblivious suboptimality certificates for partition-matroid solutions.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::objectives::{Assignment, RobotId, SetObjective};
use crate::planners::{BlockSolver, Execution};
use crate::scalar::Real;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoundReport<T> {
    pub solution_value: T,
    /// `f(X) + Σ_r max_{x ∈ B_r} f(x | X)`.
    pub online_bound: T,
    /// `Σ_r max_{x ∈ B_r} f(x)`.
    pub oblivious_bound: T,
    pub online_ratio: T,
    pub oblivious_ratio: T,
    pub best_ratio: T,
    /// Whether the block maxima are exact, making both bounds true upper bounds on the optimum.
    pub exact: bool,
}

fn ratio<T: Real>(value: T, bound: T) -> T {
    if bound <= T::zero() {
        T::one()
    } else {
        value / bound
    }
}

/// Evaluates both certificates for the solution `x` over the blocks of `robots`.
///
/// Each block maximum is at least the gain of the solution's own action for
/// that robot, which keeps approximate maxima from undercutting the solution.
/// A robot whose block is empty contributes zero.
pub fn certificate<T: Real, O: SetObjective<T> + ?Sized, S: BlockSolver<T>>(
    x: &Assignment<T>,
    robots: &[RobotId],
    objective: &O,
    solver: &S,
    exec: Execution,
) -> BoundReport<T> {
    let set = x.refs();
    let value = objective.value(&set);
    let block = |&r: &RobotId| -> (T, T) {
        let online = solver.solve(r, &set).map_or(T::zero(), |s| s.best_gain.max(T::zero()));
        let mut oblivious = solver.solve(r, &[]).map_or(T::zero(), |s| s.best_gain.max(T::zero()));
        if let Some(own) = x.get(r) {
            oblivious = oblivious.max(objective.value(&[own]));
        }
        (online, oblivious)
    };
    let maxima: Vec<(T, T)> = match exec {
        Execution::Serial => robots.iter().map(block).collect(),
        Execution::Parallel => robots.par_iter().map(block).collect(),
    };
    let online_bound = value + maxima.iter().map(|m| m.0).sum::<T>();
    let oblivious_bound = maxima.iter().map(|m| m.1).sum::<T>();
    let online_ratio = ratio(value, online_bound);
    let oblivious_ratio = ratio(value, oblivious_bound);
    BoundReport {
        solution_value: value,
        online_bound,
        oblivious_bound,
        online_ratio,
        oblivious_ratio,
        best_ratio: online_ratio.max(oblivious_ratio),
        exact: solver.is_exact(),
    }
}

/// Mean and standard error of one step across trials.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RatioSummary<T> {
    pub mean: T,
    pub std_error: T,
    pub trials: usize,
}

/// Per-step mean ± standard error of best ratios over trials. Trials may
/// have different lengths; each step uses the trials that reached it.
/// The standard error is the sample standard deviation over `sqrt(n)`, zero for one trial.
pub fn best_ratio_series<T: Real>(trials: &[Vec<T>]) -> Vec<RatioSummary<T>> {
    let steps = trials.iter().map(Vec::len).max().unwrap_or(0);
    (0..steps)
        .map(|i| {
            let xs: Vec<T> = trials.iter().filter_map(|t| t.get(i).copied()).collect();
            if xs.iter().all(|&v| v == xs[0]) {
                return RatioSummary { mean: xs[0], std_error: T::zero(), trials: xs.len() };
            }
            let n = T::from_usize_lossy(xs.len());
            let mean = xs.iter().copied().sum::<T>() / n;
            let std_error = if xs.len() < 2 {
                T::zero()
            } else {
                let var = xs.iter().map(|&v| (v - mean) * (v - mean)).sum::<T>() / (n - T::one());
                (var / n).sqrt()
            };
            RatioSummary { mean, std_error, trials: xs.len() }
        })
        .collect()
}

/// Extracts the best-ratio series of one trial.
pub fn best_ratios<T: Real>(reports: &[BoundReport<T>]) -> Vec<T> {
    reports.iter().map(|r| r.best_ratio).collect()
}
