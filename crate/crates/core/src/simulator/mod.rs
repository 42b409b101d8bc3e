//! Receding-horizon exploration: plan, execute first controls, observe, fuse, log.

mod config;
mod metrics;
mod volume;

use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

pub use config::{EnvironmentSpec, ExperimentConfig};
pub use metrics::{write_csv, MetricsRecord, CSV_HEADER};
pub use volume::{exploration_volume, fully_known, reachable_positions};

use crate::bounds::certificate;
use crate::grid::{
    generate_boxes, generate_empty, load_environment, write_environment, BeliefMap, BoxesParams, GridError, GroundTruthEnvironment,
};
use crate::objectives::{distance_field, sample_informative_views, EnvMode, ExplorationObjective, ObjectiveError, SetObjective};
use crate::planners::{
    apply_dynamics, myopic_plan, rsp_plan, segment_is_safe, sequential_greedy, ControlInput, Coordinator, Execution, MctsSolver,
    PlannerError,
};
use crate::scalar::{derive_seed, Vec3};
use crate::sensing::{fuse_observation, observe, RobotState, SensingError, Yaw};

#[derive(Debug, Error)]
pub enum SimError {
    #[error("configuration error: {0}")]
    Config(String),
    #[error(transparent)]
    Grid(#[from] GridError),
    #[error(transparent)]
    Objective(#[from] ObjectiveError),
    #[error(transparent)]
    Planner(#[from] PlannerError),
    #[error(transparent)]
    Sensing(#[from] SensingError),
    #[error("planner returned an unsafe action for robot {robot} at iteration {iteration}")]
    UnsafeAction { robot: usize, iteration: usize },
}

// Seed streams derived from the master seed.
const STREAM_STARTS: u64 = 0;
const STREAM_VIEWS: u64 = 1;
const STREAM_SAMPLES: u64 = 2;
const STREAM_SEARCH: u64 = 3;
const STREAM_ROUNDS: u64 = 4;
const STREAM_BOUNDS: u64 = 5;

/// SHA-256 of the environment's voxel text, hex encoded.
pub fn environment_hash(env: &GroundTruthEnvironment<f64>) -> String {
    hex::encode(Sha256::digest(write_environment(env).as_bytes()))
}

/// Builds the ground truth and the nominal start position.
pub fn build_environment(cfg: &ExperimentConfig) -> Result<(GroundTruthEnvironment<f64>, Vec3<f64>), SimError> {
    let center = |extent: [f64; 3]| cfg.start.map_or(Vec3::from_f64(extent) * 0.5, Vec3::from_f64);
    match &cfg.environment {
        EnvironmentSpec::Empty { extent } => Ok((generate_empty(Vec3::from_f64(*extent), cfg.resolution)?, center(*extent))),
        EnvironmentSpec::Boxes { extent, box_count, box_size, seed } => {
            let start = center(*extent);
            let params = BoxesParams {
                seed: *seed,
                extent: Vec3::from_f64(*extent),
                resolution: cfg.resolution,
                box_count: *box_count,
                box_size: *box_size,
                start,
            };
            Ok((generate_boxes(&params)?, start))
        }
        EnvironmentSpec::File { path } => {
            let env = load_environment(path)?;
            let start = center(env.grid.extent().to_f64());
            Ok((env, start))
        }
    }
}

fn validate(cfg: &ExperimentConfig) -> Result<(), SimError> {
    if cfg.robot_count == 0 {
        return Err(SimError::Config("robot_count must be at least 1".into()));
    }
    if !(cfg.completion_fraction >= 0.0 && cfg.completion_fraction <= 1.0) {
        return Err(SimError::Config(format!("completion_fraction {} outside [0, 1]", cfg.completion_fraction)));
    }
    if !(cfg.start_radius >= 0.0) {
        return Err(SimError::Config("start_radius must be non-negative".into()));
    }
    if !(cfg.occupancy_prior > 0.0 && cfg.occupancy_prior < 1.0) {
        return Err(SimError::Config("occupancy_prior must lie in (0, 1)".into()));
    }
    if cfg.distance.view_threshold < 0.0 || cfg.distance.distance_factor < 0.0 {
        return Err(SimError::Config("view threshold and distance factor must be non-negative".into()));
    }
    cfg.camera.validate()?;
    cfg.planner.validate()?;
    cfg.objective.validate()?;
    Ok(())
}

/// Perturbed starts: uniform in the start ball, restricted to free cells, random yaw.
fn sample_starts(cfg: &ExperimentConfig, env: &GroundTruthEnvironment<f64>, nominal: Vec3<f64>) -> Result<Vec<RobotState<f64>>, SimError> {
    let free_at = |p: Vec3<f64>| env.grid.world_to_index(p).is_some_and(|c| !env.is_occupied(c));
    if !free_at(nominal) {
        return Err(SimError::Config(format!("start {:?} is outside the map or occupied", nominal.to_f64())));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(cfg.seed, &[STREAM_STARTS]));
    let r = cfg.start_radius;
    let mut starts = Vec::with_capacity(cfg.robot_count);
    for _ in 0..cfg.robot_count {
        let mut position = nominal;
        for _ in 0..1000 {
            let d = Vec3::new(rng.gen_range(-1.0..=1.0), rng.gen_range(-1.0..=1.0), rng.gen_range(-1.0..=1.0));
            let p = nominal + d * r;
            if d.norm() <= 1.0 && free_at(p) {
                position = p;
                break;
            }
        }
        starts.push(RobotState::new(position, Yaw::ALL[rng.gen_range(0..4)]));
    }
    Ok(starts)
}

/// Live state of one experiment.
pub struct Simulation {
    cfg: ExperimentConfig,
    env: GroundTruthEnvironment<f64>,
    belief: BeliefMap<f64>,
    robots: Vec<RobotState<f64>>,
    starts: Vec<RobotState<f64>>,
    iteration: usize,
    exploration_volume: usize,
}

impl Simulation {
    /// Builds the world, places the robots and fuses their first observations.
    pub fn new(cfg: ExperimentConfig) -> Result<Self, SimError> {
        validate(&cfg)?;
        let (env, nominal) = build_environment(&cfg)?;
        let starts = sample_starts(&cfg, &env, nominal)?;
        let volume = match cfg.exploration_volume {
            Some(v) => v,
            None => {
                let positions: Vec<_> = starts.iter().map(|s| s.position).collect();
                exploration_volume(&env, &positions, &cfg.camera)
            }
        };
        let mut belief = BeliefMap::unknown_like(&env.grid, cfg.occupancy_prior)?;
        for s in &starts {
            fuse_observation(&mut belief, &observe(s, &env, &cfg.camera))?;
        }
        Ok(Self { robots: starts.clone(), starts, cfg, env, belief, iteration: 0, exploration_volume: volume })
    }

    pub fn config(&self) -> &ExperimentConfig {
        &self.cfg
    }

    pub fn environment(&self) -> &GroundTruthEnvironment<f64> {
        &self.env
    }

    pub fn belief(&self) -> &BeliefMap<f64> {
        &self.belief
    }

    pub fn robots(&self) -> &[RobotState<f64>] {
        &self.robots
    }

    pub fn starts(&self) -> &[RobotState<f64>] {
        &self.starts
    }

    pub fn iteration(&self) -> usize {
        self.iteration
    }

    pub fn exploration_volume(&self) -> usize {
        self.exploration_volume
    }

    /// Count of known cells; equals the cells seen so far under noiseless sensing.
    pub fn covered_cells(&self) -> usize {
        self.belief.known_count()
    }

    pub fn is_complete(&self) -> bool {
        self.covered_cells() as f64 >= self.cfg.completion_fraction * self.exploration_volume as f64
    }

    fn record(&self, objective_value: f64, plan_wall_ms: f64) -> MetricsRecord {
        let covered = self.covered_cells();
        MetricsRecord {
            iteration: self.iteration,
            robot_iterations: self.iteration * self.cfg.robot_count,
            covered_cells: covered,
            coverage_m3: covered as f64 * self.belief.grid.cell_volume(),
            objective_value,
            online_bound: f64::NAN,
            oblivious_bound: f64::NAN,
            online_ratio: f64::NAN,
            oblivious_ratio: f64::NAN,
            best_ratio: f64::NAN,
            plan_wall_ms,
        }
    }

    /// The record describing the state before any planning.
    pub fn initial_record(&self) -> MetricsRecord {
        self.record(0.0, 0.0)
    }

    /// One receding-horizon iteration.
    pub fn step(&mut self) -> Result<MetricsRecord, SimError> {
        let k = self.iteration as u64 + 1;
        let seed = self.cfg.seed;
        let ids: Vec<usize> = (0..self.robots.len()).collect();
        let clock = Instant::now();

        let (controls, value, bounds) = {
            let mut view_cfg = self.cfg.distance.clone();
            view_cfg.sample_seed = derive_seed(seed, &[k, STREAM_VIEWS]);
            let goals = sample_informative_views(&self.belief, &self.cfg.camera, &view_cfg);
            let field = distance_field(&self.belief, &goals);
            let mut spec = self.cfg.objective;
            if let EnvMode::MonteCarlo { samples, .. } = spec.env_mode {
                spec.env_mode = EnvMode::MonteCarlo { samples, seed: derive_seed(seed, &[k, STREAM_SAMPLES]) };
            }
            let objective =
                ExplorationObjective::new(&self.belief, &self.cfg.camera, spec)?.with_distance(&field, view_cfg.distance_factor);
            let search_seed = derive_seed(seed, &[k, STREAM_SEARCH]);
            let solver = MctsSolver::new(&objective, self.robots.clone(), self.cfg.planner.clone(), search_seed);
            let plan = match self.cfg.planner.coordinator {
                Coordinator::Sequential => sequential_greedy(&solver, &ids),
                Coordinator::Myopic => myopic_plan(&solver, &ids, Execution::Parallel),
                Coordinator::Rsp { rounds } => rsp_plan(&solver, &ids, rounds, derive_seed(seed, &[k, STREAM_ROUNDS]), Execution::Parallel),
            };
            let value = objective.value(&plan.refs());
            let bounds = self.cfg.compute_bounds.then(|| {
                let bound_solver =
                    MctsSolver::new(&objective, self.robots.clone(), self.cfg.planner.clone(), derive_seed(seed, &[k, STREAM_BOUNDS]));
                certificate(&plan, &ids, &objective, &bound_solver, Execution::Parallel)
            });
            let controls: Vec<ControlInput> = ids.iter().map(|&r| plan.get(r).map_or(ControlInput::YawLeft, |a| a.controls()[0])).collect();
            (controls, value, bounds)
        };
        let wall = if self.cfg.record_wall_clock { clock.elapsed().as_secs_f64() * 1e3 } else { 0.0 };

        for (r, &u) in controls.iter().enumerate() {
            let next = apply_dynamics(&self.robots[r], u);
            if !segment_is_safe(&self.belief, self.robots[r].position, next.position) {
                return Err(SimError::UnsafeAction { robot: r, iteration: self.iteration + 1 });
            }
            self.robots[r] = next;
        }
        for r in 0..self.robots.len() {
            let obs = observe(&self.robots[r], &self.env, &self.cfg.camera);
            fuse_observation(&mut self.belief, &obs)?;
        }
        self.iteration += 1;
        let mut rec = self.record(value, wall);
        if let Some(b) = bounds {
            rec.set_bounds(&b);
        }
        Ok(rec)
    }
}

/// Everything a run produces.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunResult {
    pub records: Vec<MetricsRecord>,
    pub completed: bool,
    pub completion_iteration: Option<usize>,
    pub completion_robot_iterations: Option<usize>,
    pub exploration_volume: usize,
    pub environment_hash: String,
    pub starts: Vec<RobotState<f64>>,
}

/// Steps until coverage reaches the completion fraction of the exploration
/// volume or the iteration budget runs out.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<RunResult, SimError> {
    let mut sim = Simulation::new(cfg.clone())?;
    let mut records = vec![sim.initial_record()];
    while !sim.is_complete() && sim.iteration() < cfg.max_iterations {
        records.push(sim.step()?);
    }
    let completed = sim.is_complete();
    let completion_iteration = completed.then(|| sim.iteration());
    Ok(RunResult {
        completion_robot_iterations: completion_iteration.map(|i| i * cfg.robot_count),
        completion_iteration,
        completed,
        exploration_volume: sim.exploration_volume(),
        environment_hash: environment_hash(sim.environment()),
        starts: sim.starts().to_vec(),
        records,
    })
}

/// JSON record sufficient to reproduce a run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub format: String,
    pub config: ExperimentConfig,
    pub environment_hash: String,
    pub exploration_volume: usize,
    pub starts: Vec<RobotState<f64>>,
    pub completed: bool,
    pub completion_iteration: Option<usize>,
    pub completion_robot_iterations: Option<usize>,
    pub iterations: usize,
}

pub const MANIFEST_FORMAT: &str = "volex-run/1";

impl RunManifest {
    pub fn new(config: &ExperimentConfig, result: &RunResult) -> Self {
        Self {
            format: MANIFEST_FORMAT.into(),
            config: config.clone(),
            environment_hash: result.environment_hash.clone(),
            exploration_volume: result.exploration_volume,
            starts: result.starts.clone(),
            completed: result.completed,
            completion_iteration: result.completion_iteration,
            completion_robot_iterations: result.completion_robot_iterations,
            iterations: result.records.len() - 1,
        }
    }
}
