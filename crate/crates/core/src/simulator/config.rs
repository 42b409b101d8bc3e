use std::path::PathBuf;

use serde::{Deserialize, Serialize};

use crate::objectives::{DistanceRewardConfig, EnvMode, ObjectiveSpec, Weighting};
use crate::planners::{ControlSet, Coordinator, PlannerConfig};
use crate::sensing::CameraModel;

/// Where the ground truth comes from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum EnvironmentSpec {
    Empty { extent: [f64; 3] },
    Boxes { extent: [f64; 3], box_count: usize, box_size: (f64, f64), seed: u64 },
    File { path: PathBuf },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub environment: EnvironmentSpec,
    /// Ignored for file environments, which carry their own resolution.
    pub resolution: f64,
    pub robot_count: usize,
    /// Nominal start position; the center of the environment when absent.
    pub start: Option<[f64; 3]>,
    /// Robots start uniformly inside this ball around `start`, in free cells.
    pub start_radius: f64,
    pub camera: CameraModel<f64>,
    pub planner: PlannerConfig<f64>,
    pub objective: ObjectiveSpec<f64>,
    /// Occupancy probability of unknown cells.
    pub occupancy_prior: f64,
    /// `sample_seed` is replaced by a per-iteration seed derived from `seed`.
    pub distance: DistanceRewardConfig<f64>,
    pub max_iterations: usize,
    pub completion_fraction: f64,
    /// Evaluate online and oblivious certificates every iteration.
    pub compute_bounds: bool,
    /// Fill `plan_wall_ms`; otherwise it is written as 0 so CSVs are reproducible byte for byte.
    pub record_wall_clock: bool,
    pub seed: u64,
    /// Cells counted as the maximum attainable coverage; computed when absent.
    pub exploration_volume: Option<usize>,
}

impl ExperimentConfig {
    /// Sequential-planner defaults on an empty 4×4×2 m world.
    pub fn sequential_defaults() -> Self {
        Self {
            environment: EnvironmentSpec::Empty { extent: [4.0, 4.0, 2.0] },
            resolution: 0.1,
            robot_count: 4,
            start: None,
            start_radius: 0.5,
            camera: CameraModel::depth_camera(),
            planner: PlannerConfig {
                horizon: 10,
                mcts_samples: 200,
                c_p: 1500.0,
                controls: ControlSet::standard(),
                coordinator: Coordinator::Sequential,
            },
            objective: ObjectiveSpec { weighting: Weighting::UnitNewCell, env_mode: EnvMode::Optimistic, discount: 0.7, ray_sum: false },
            occupancy_prior: 0.125,
            distance: DistanceRewardConfig { view_threshold: 900.0, distance_factor: 500.0, view_sample_count: 100, sample_seed: 0 },
            max_iterations: 400,
            completion_fraction: 0.9,
            compute_bounds: false,
            record_wall_clock: false,
            seed: 0,
            exploration_volume: None,
        }
    }

    /// Myopic-planner variant: lower view threshold, larger distance factor, no discount.
    pub fn myopic_defaults() -> Self {
        let mut cfg = Self::sequential_defaults();
        cfg.planner.coordinator = Coordinator::Myopic;
        cfg.distance.view_threshold = 300.0;
        cfg.distance.distance_factor = 700.0;
        cfg.objective.discount = 1.0;
        cfg
    }
}
