use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{anyhow, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};

use volex_core::grid::{generate_boxes, generate_empty, load_environment, save_environment, BoxesParams};
use volex_core::objectives::{EnvMode, ObjectiveSpec, Weighting, MAX_ENUMERATION_CELLS};
use volex_core::planners::{ControlSet, Coordinator};
use volex_core::simulator::{exploration_volume, run_experiment, write_csv, EnvironmentSpec, ExperimentConfig, RunManifest, SimError};
use volex_core::verify::Suite;
use volex_core::{Camera, Point};

const EXIT_CONFIG: u8 = 1;
const EXIT_BUDGET: u8 = 2;
const EXIT_VERIFY: u8 = 3;
const EXIT_USAGE: u8 = 64;

#[derive(Parser)]
#[command(name = "volex", version, about = "Multi-robot volumetric exploration simulator")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one exploration experiment and write its CSV and manifest.
    Run(Box<RunArgs>),
    /// Run the brute-force oracle suites on random tiny instances.
    Verify(VerifyArgs),
    /// Generate or inspect voxel environment files.
    #[command(subcommand)]
    Env(EnvCommand),
}

#[derive(Clone, Copy, ValueEnum)]
enum EnvKind {
    Empty,
    Boxes,
    File,
}

#[derive(Clone, Copy, PartialEq, ValueEnum)]
enum PlannerKind {
    Sequential,
    Myopic,
    Rsp,
}

#[derive(Clone, Copy, ValueEnum)]
enum ObjectiveKind {
    /// Unit-weight coverage with all unknown space free.
    Optimistic,
    /// Monte-Carlo expected coverage under the occupancy prior.
    Expected,
    /// Independent per-ray expected coverage.
    RaySum,
}

#[derive(Clone, Copy, ValueEnum)]
enum WeightingKind {
    Unit,
    Entropy,
    ScaledEntropy,
}

#[derive(Args)]
struct WorldArgs {
    /// Extent in meters as XxYxZ.
    #[arg(long, default_value = "4x4x2", value_parser = parse_triple)]
    extent: [f64; 3],
    #[arg(long, default_value_t = 0.1)]
    resolution: f64,
    /// Number of boxes for the boxes generator.
    #[arg(long, default_value_t = 8)]
    boxes: usize,
    /// Box edge range in meters as MIN,MAX.
    #[arg(long, default_value = "0.4,1.0", value_parser = parse_pair)]
    box_size: (f64, f64),
    /// Seed of the boxes generator.
    #[arg(long, default_value_t = 1)]
    env_seed: u64,
}

#[derive(Args)]
struct RunArgs {
    /// Rerun exactly the configuration recorded in a manifest; other run flags are ignored.
    #[arg(long)]
    manifest: Option<PathBuf>,
    #[arg(long, value_enum, default_value = "boxes")]
    env: EnvKind,
    /// Voxel file for `--env file`.
    #[arg(long)]
    env_file: Option<PathBuf>,
    #[command(flatten)]
    world: WorldArgs,
    #[arg(long, default_value_t = 4)]
    robots: usize,
    #[arg(long, value_enum, default_value = "sequential")]
    planner: PlannerKind,
    /// Planning rounds for RSP.
    #[arg(long, default_value_t = 3)]
    rounds: usize,
    /// Master seed; falls back to VOLEX_SEED, then 0.
    #[arg(long, env = "VOLEX_SEED", default_value_t = 0)]
    seed: u64,
    /// CSV output path.
    #[arg(long, default_value = "run.csv")]
    out: PathBuf,
    /// Manifest output path; defaults to the CSV path with a .json extension.
    #[arg(long)]
    manifest_out: Option<PathBuf>,
    #[arg(long, default_value_t = 10)]
    horizon: usize,
    /// Tree-search samples per robot and planning step.
    #[arg(long, default_value_t = 200)]
    samples: usize,
    #[arg(long, default_value_t = 1500.0)]
    cp: f64,
    /// Defaults to 900 (300 for myopic).
    #[arg(long)]
    view_threshold: Option<f64>,
    /// Defaults to 500 (700 for myopic).
    #[arg(long)]
    dist_factor: Option<f64>,
    /// Defaults to 0.7 (1.0 for myopic).
    #[arg(long)]
    discount: Option<f64>,
    /// Candidate views sampled per iteration for the distance reward.
    #[arg(long, default_value_t = 100)]
    view_samples: usize,
    #[arg(long, value_enum, default_value = "optimistic")]
    objective: ObjectiveKind,
    /// Cell weighting for the expected and ray-sum objectives.
    #[arg(long, value_enum, default_value = "scaled-entropy")]
    weighting: WeightingKind,
    /// Environment samples for the expected objective.
    #[arg(long, default_value_t = 20)]
    mc_samples: usize,
    /// Occupancy probability of unknown cells.
    #[arg(long, default_value_t = 0.125)]
    prior: f64,
    #[arg(long, default_value_t = 400)]
    max_iters: usize,
    /// Fraction of the exploration volume that counts as complete.
    #[arg(long, default_value_t = 0.9)]
    completion: f64,
    #[arg(long, default_value_t = 0.5)]
    start_radius: f64,
    /// Start position as X,Y,Z; the map center by default.
    #[arg(long, value_parser = parse_point)]
    start: Option<[f64; 3]>,
    /// Add lateral translations to the control set.
    #[arg(long)]
    lateral: bool,
    /// Compute online and oblivious suboptimality bounds every iteration.
    #[arg(long)]
    bounds: bool,
    /// Record planning wall-clock time (makes the CSV non-reproducible).
    #[arg(long)]
    wall_clock: bool,
    /// Worker threads; results do not depend on this.
    #[arg(long)]
    threads: Option<usize>,
}

#[derive(Args)]
struct VerifyArgs {
    /// Run a single suite: theorem1, monotonicity, greedy-bound, certificate, optimism or ray-sum.
    #[arg(long)]
    suite: Option<String>,
    /// Instances per suite (suite default when absent).
    #[arg(long)]
    instances: Option<usize>,
    #[arg(long, default_value_t = 1)]
    seed: u64,
}

#[derive(Subcommand)]
enum EnvCommand {
    /// Write a generated environment in the voxel text format.
    Gen {
        #[arg(value_enum)]
        kind: GenKind,
        #[command(flatten)]
        world: WorldArgs,
        /// Start position kept free by the boxes generator; the center by default.
        #[arg(long, value_parser = parse_point)]
        start: Option<[f64; 3]>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Print size, occupancy and exploration volume of a voxel file.
    Info {
        path: PathBuf,
        #[arg(long, value_parser = parse_point)]
        start: Option<[f64; 3]>,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum GenKind {
    Empty,
    Boxes,
}

fn parse_triple(s: &str) -> Result<[f64; 3], String> {
    parse_list(s, 'x')
}

fn parse_point(s: &str) -> Result<[f64; 3], String> {
    parse_list(s, ',')
}

fn parse_list(s: &str, sep: char) -> Result<[f64; 3], String> {
    let v: Vec<f64> = s.split(sep).map(|p| p.trim().parse::<f64>().map_err(|e| format!("{p:?}: {e}"))).collect::<Result<_, _>>()?;
    v.try_into().map_err(|_| format!("expected three values separated by '{sep}'"))
}

fn parse_pair(s: &str) -> Result<(f64, f64), String> {
    let (a, b) = s.split_once(',').ok_or("expected MIN,MAX")?;
    Ok((a.trim().parse().map_err(|e| format!("{e}"))?, b.trim().parse().map_err(|e| format!("{e}"))?))
}

fn weighting(w: WeightingKind) -> Weighting {
    match w {
        WeightingKind::Unit => Weighting::UnitNewCell,
        WeightingKind::Entropy => Weighting::Entropy,
        WeightingKind::ScaledEntropy => Weighting::ScaledEntropy,
    }
}

fn config_from_args(a: &RunArgs) -> Result<ExperimentConfig> {
    let myopic = a.planner == PlannerKind::Myopic;
    let mut cfg = if myopic { ExperimentConfig::myopic_defaults() } else { ExperimentConfig::sequential_defaults() };
    cfg.environment = match a.env {
        EnvKind::Empty => EnvironmentSpec::Empty { extent: a.world.extent },
        EnvKind::Boxes => {
            EnvironmentSpec::Boxes { extent: a.world.extent, box_count: a.world.boxes, box_size: a.world.box_size, seed: a.world.env_seed }
        }
        EnvKind::File => EnvironmentSpec::File { path: a.env_file.clone().ok_or_else(|| anyhow!("--env file requires --env-file"))? },
    };
    cfg.resolution = a.world.resolution;
    cfg.robot_count = a.robots;
    cfg.start = a.start;
    cfg.start_radius = a.start_radius;
    cfg.planner.horizon = a.horizon;
    cfg.planner.mcts_samples = a.samples;
    cfg.planner.c_p = a.cp;
    cfg.planner.controls = if a.lateral { ControlSet::with_lateral() } else { ControlSet::standard() };
    cfg.planner.coordinator = match a.planner {
        PlannerKind::Sequential => Coordinator::Sequential,
        PlannerKind::Myopic => Coordinator::Myopic,
        PlannerKind::Rsp => Coordinator::Rsp { rounds: a.rounds },
    };
    if let Some(v) = a.view_threshold {
        cfg.distance.view_threshold = v;
    }
    if let Some(v) = a.dist_factor {
        cfg.distance.distance_factor = v;
    }
    cfg.distance.view_sample_count = a.view_samples;
    let discount = a.discount.unwrap_or(cfg.objective.discount);
    cfg.objective = match a.objective {
        ObjectiveKind::Optimistic => ObjectiveSpec::optimistic(),
        ObjectiveKind::Expected => ObjectiveSpec {
            weighting: weighting(a.weighting),
            env_mode: EnvMode::MonteCarlo { samples: a.mc_samples, seed: 0 },
            discount: 1.0,
            ray_sum: false,
        },
        ObjectiveKind::RaySum => ObjectiveSpec {
            weighting: weighting(a.weighting),
            env_mode: EnvMode::Exact { enumeration_limit: MAX_ENUMERATION_CELLS },
            discount: 1.0,
            ray_sum: true,
        },
    }
    .with_discount(discount);
    cfg.occupancy_prior = a.prior;
    cfg.max_iterations = a.max_iters;
    cfg.completion_fraction = a.completion;
    cfg.compute_bounds = a.bounds;
    cfg.record_wall_clock = a.wall_clock;
    cfg.seed = a.seed;
    Ok(cfg)
}

fn cmd_run(a: RunArgs) -> Result<u8> {
    let cfg = match &a.manifest {
        Some(path) => {
            let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
            serde_json::from_str::<RunManifest>(&text).with_context(|| format!("parsing {}", path.display()))?.config
        }
        None => config_from_args(&a)?,
    };
    let result = match run_experiment(&cfg) {
        Ok(r) => r,
        Err(e @ (SimError::UnsafeAction { .. } | SimError::Sensing(_))) => return Err(e.into()),
        Err(e) => {
            eprintln!("error: {e}");
            return Ok(EXIT_CONFIG);
        }
    };
    fs::write(&a.out, write_csv(&result.records)).with_context(|| format!("writing {}", a.out.display()))?;
    let manifest_path = a.manifest_out.clone().unwrap_or_else(|| a.out.with_extension("json"));
    let manifest = RunManifest::new(&cfg, &result);
    fs::write(&manifest_path, serde_json::to_string_pretty(&manifest)? + "\n")
        .with_context(|| format!("writing {}", manifest_path.display()))?;
    let last = result.records.last().unwrap();
    println!(
        "{} after {} iterations: {} / {} cells ({:.1}%)",
        if result.completed { "complete" } else { "budget exhausted" },
        last.iteration,
        last.covered_cells,
        result.exploration_volume,
        100.0 * last.covered_cells as f64 / result.exploration_volume.max(1) as f64
    );
    Ok(if result.completed { 0 } else { EXIT_BUDGET })
}

fn default_instances(s: Suite) -> usize {
    match s {
        Suite::Theorem1 => 200,
        Suite::Optimism => 50,
        _ => 100,
    }
}

fn cmd_verify(a: VerifyArgs) -> Result<u8> {
    let suites = match &a.suite {
        Some(name) => vec![Suite::from_name(name).ok_or_else(|| UsageError(format!("unknown suite {name:?}")))?],
        None => Suite::ALL.to_vec(),
    };
    let mut status = 0;
    for s in suites {
        let report = s.run(a.instances.unwrap_or_else(|| default_instances(s)), a.seed);
        let stat = report.statistic.map_or(String::new(), |v| format!(" (min ratio {v:.4})"));
        println!("{}: {}/{} passed{}", s.name(), report.passed, report.instances, stat);
        if let Some(cx) = &report.counterexample {
            if status == 0 {
                println!("{}", serde_json::to_string_pretty(cx)?);
            }
            status = EXIT_VERIFY;
        }
    }
    Ok(status)
}

fn nominal_start(extent: Point, start: Option<[f64; 3]>) -> Point {
    start.map_or(extent * 0.5, Point::from_f64)
}

fn cmd_env(c: EnvCommand) -> Result<u8> {
    match c {
        EnvCommand::Gen { kind, world, start, out } => {
            let extent = Point::from_f64(world.extent);
            let env = match kind {
                GenKind::Empty => generate_empty(extent, world.resolution)?,
                GenKind::Boxes => generate_boxes(&BoxesParams {
                    seed: world.env_seed,
                    extent,
                    resolution: world.resolution,
                    box_count: world.boxes,
                    box_size: world.box_size,
                    start: nominal_start(extent, start),
                })?,
            };
            save_environment(&env, &out)?;
            Ok(0)
        }
        EnvCommand::Info { path, start } => {
            let env = load_environment::<f64>(&path)?;
            print_info(&path, &env, start);
            Ok(0)
        }
    }
}

fn print_info(path: &Path, env: &volex_core::Environment, start: Option<[f64; 3]>) {
    let [nx, ny, nz] = env.grid.dims();
    let cell = env.grid.cell_volume();
    let start = nominal_start(env.grid.extent(), start);
    let volume = exploration_volume(env, &[start], &Camera::depth_camera());
    println!("file: {}", path.display());
    println!("dims: {nx} x {ny} x {nz}");
    println!("resolution: {} m", env.grid.resolution());
    println!("occupied_fraction: {:.6}", env.occupied_count() as f64 / env.grid.len() as f64);
    println!("bounding_volume_m3: {:.3}", env.bounding_volume());
    println!("exploration_volume_cells: {volume}");
    println!("exploration_volume_m3: {:.3}", volume as f64 * cell);
}

#[derive(Debug)]
struct UsageError(String);

impl std::fmt::Display for UsageError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for UsageError {}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { EXIT_USAGE } else { 0 });
        }
    };
    let threads = match &cli.command {
        Command::Run(a) => a.threads,
        _ => None,
    };
    if let Some(n) = threads {
        if n == 0 {
            eprintln!("error: --threads must be at least 1");
            return ExitCode::from(EXIT_USAGE);
        }
        rayon::ThreadPoolBuilder::new().num_threads(n).build_global().expect("thread pool is built once");
    }
    let outcome = match cli.command {
        Command::Run(a) => cmd_run(*a),
        Command::Verify(a) => cmd_verify(a),
        Command::Env(c) => cmd_env(c),
    };
    match outcome {
        Ok(code) => ExitCode::from(code),
        Err(e) if e.is::<UsageError>() => {
            eprintln!("error: {e}");
            ExitCode::from(EXIT_USAGE)
        }
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(EXIT_CONFIG)
        }
    }
}
