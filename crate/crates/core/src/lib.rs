//! Multi-robot volumetric exploration: voxel worlds, a depth camera, coverage
//! and information objectives, submodular coordinators and their
//! suboptimality certificates, and a deterministic receding-horizon simulator.
//!
//! Library code is generic over the scalar type; the aliases at the crate
//! root fix it to `f64`.

// `!(x > 0)` is used on purpose: it also rejects NaN
#![allow(clippy::neg_cmp_op_on_partial_ord)]
// per-axis loops read better indexed
#![allow(clippy::needless_range_loop)]

pub mod bounds;
pub mod grid;
pub mod objectives;
pub mod planners;
pub mod scalar;
pub mod sensing;
pub mod simulator;
pub mod verify;

pub use scalar::{Real, Vec3};

pub type Scalar = f64;
pub type Point = scalar::Vec3<f64>;
pub type Environment = grid::GroundTruthEnvironment<f64>;
pub type Belief = grid::BeliefMap<f64>;
pub type Camera = sensing::CameraModel<f64>;
pub type State = sensing::RobotState<f64>;
pub type Action = objectives::TrajectoryAction<f64>;
pub type Plan = objectives::Assignment<f64>;
pub type Spec = objectives::ObjectiveSpec<f64>;
pub type DistanceConfig = objectives::DistanceRewardConfig<f64>;
pub type Planner = planners::PlannerConfig<f64>;
pub type Bounds = bounds::BoundReport<f64>;
