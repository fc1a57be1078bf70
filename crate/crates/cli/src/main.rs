use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use pointing_core::{GateMode, GateParams, KeypointStrategy, RoiParams, TrackerParams};

mod commands;

/// Pointing-gesture estimation from face and hand detections with depth.
#[derive(Parser, Debug)]
#[command(name = "pointing", version, about)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Estimate pointing rays and floor goals from a JSON-lines frame log.
    Estimate(EstimateArgs),
    /// Write synthetic frames for one pose as a JSON-lines frame log.
    Simulate(SimulateArgs),
    /// Angular-error grid over positions and directions.
    ExperimentA(ExperimentArgs),
    /// Floor-goal error per distance.
    ExperimentB(ExperimentArgs),
    /// Per-frame latency of the geometry pipeline on synthetic frames.
    Bench(BenchArgs),
}

#[derive(Args, Debug, Clone)]
struct RoiArgs {
    /// Keypoint strategy: mean, median, closest or dbscan.
    #[arg(long, default_value = "mean")]
    strategy: KeypointStrategy,
    /// Depth clustering neighborhood radius, meters.
    #[arg(long, default_value_t = 0.15)]
    eps: f64,
    /// Depth clustering core threshold, samples including the point itself.
    #[arg(long, default_value_t = 4)]
    min_pts: usize,
    /// Center mask radius as a fraction of min(box width, box height).
    #[arg(long, default_value_t = 0.35)]
    cobb_ratio: f64,
    /// Camera intrinsics TOML file. Defaults to a 640x480, 68 deg sensor mounted 1 m high.
    #[arg(long)]
    intrinsics: Option<PathBuf>,
}

impl RoiArgs {
    fn params(&self) -> RoiParams {
        RoiParams { eps: self.eps, min_pts: self.min_pts, cobb_ratio: self.cobb_ratio }
    }
}

#[derive(Args, Debug, Clone)]
struct TrackArgs {
    /// Smooth detection boxes with a Kalman filter bank.
    #[arg(long)]
    track: bool,
    /// Box-center acceleration noise, px/s^2.
    #[arg(long, default_value_t = 200.0)]
    sigma_accel: f64,
    /// Box measurement noise, px.
    #[arg(long, default_value_t = 4.0)]
    sigma_meas: f64,
    /// Frames a track survives without a matching detection.
    #[arg(long, default_value_t = 5)]
    max_misses: u32,
}

impl TrackArgs {
    fn params(&self) -> Option<TrackerParams> {
        self.track.then(|| TrackerParams {
            sigma_accel: self.sigma_accel,
            sigma_meas: self.sigma_meas,
            max_misses: self.max_misses,
            ..TrackerParams::default()
        })
    }
}

#[derive(Args, Debug, Clone)]
struct GateArgs {
    /// Goal window length, frames.
    #[arg(long, default_value_t = 30)]
    gate_window: usize,
    /// Oldest entry kept in the window, seconds.
    #[arg(long, default_value_t = 1.0)]
    gate_max_age: f64,
    /// Commit threshold on the goal covariance trace, m^2.
    #[arg(long, default_value_t = 0.01)]
    gate_tau: f64,
    /// Gate on goal spread (goal) or on pitch/yaw spread (direction).
    #[arg(long, default_value = "goal")]
    gate_mode: GateMode,
    /// Commit threshold in direction mode, deg^2.
    #[arg(long, default_value_t = 4.0)]
    gate_tau_angle: f64,
}

impl GateArgs {
    fn params(&self) -> GateParams {
        GateParams {
            window: self.gate_window,
            max_age: self.gate_max_age,
            tau: self.gate_tau,
            tau_angle: self.gate_tau_angle,
            mode: self.gate_mode,
        }
    }
}

#[derive(Args, Debug)]
struct EstimateArgs {
    /// Frame log, one JSON object per line; `-` reads standard input.
    #[arg(short, long, default_value = "-")]
    input: PathBuf,
    /// Estimate records; `-` writes standard output.
    #[arg(short, long, default_value = "-")]
    output: PathBuf,
    /// Also write committed goals as JSON lines to this file.
    #[arg(long)]
    commits: Option<PathBuf>,
    #[command(flatten)]
    roi: RoiArgs,
    #[command(flatten)]
    track: TrackArgs,
    #[command(flatten)]
    gate: GateArgs,
}

#[derive(Args, Debug)]
struct SimulateArgs {
    /// Scenario TOML file; built-in defaults otherwise.
    #[arg(long)]
    scenario: Option<PathBuf>,
    /// Subject distance from the camera, meters.
    #[arg(long, default_value_t = 2.5)]
    range: f64,
    /// Subject bearing from the optical axis, degrees (positive right).
    #[arg(long, default_value_t = 0.0)]
    bearing: f64,
    /// Named pointing direction from the scenario.
    #[arg(long, conflicts_with = "target")]
    direction: Option<String>,
    /// Floor target `x,y` in meters; the default is the first scenario direction.
    #[arg(long, value_parser = parse_target)]
    target: Option<(f64, f64)>,
    /// Number of frames; defaults to the scenario's frames per pose.
    #[arg(long)]
    frames: Option<usize>,
    /// RNG seed; defaults to the scenario seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Frame log; `-` writes standard output.
    #[arg(short, long, default_value = "-")]
    output: PathBuf,
    /// Ground truth per frame as JSON lines.
    #[arg(long)]
    truth: Option<PathBuf>,
    /// Camera intrinsics TOML file.
    #[arg(long)]
    intrinsics: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct ExperimentArgs {
    /// Scenario TOML file; built-in defaults otherwise.
    #[arg(long)]
    scenario: Option<PathBuf>,
    /// Directory for CSV, SVG and text outputs.
    #[arg(long, default_value = "results")]
    out_dir: PathBuf,
    /// RNG seed; overrides the scenario seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Frames per pose; overrides the scenario value.
    #[arg(long)]
    frames: Option<usize>,
    /// Run cells one after another instead of in parallel.
    #[arg(long)]
    serial: bool,
    /// Strategies to score in experiment-a (comma separated); all by default.
    #[arg(long, value_delimiter = ',')]
    strategies: Vec<KeypointStrategy>,
    #[command(flatten)]
    roi: RoiArgs,
}

#[derive(Args, Debug)]
struct BenchArgs {
    /// Frames to time.
    #[arg(long, default_value_t = 1000)]
    frames: usize,
    /// Depth samples per frame across all regions.
    #[arg(long, default_value_t = 5000)]
    samples: usize,
    #[arg(long, default_value_t = 42)]
    seed: u64,
    /// Print the report as JSON.
    #[arg(long)]
    json: bool,
    #[command(flatten)]
    roi: RoiArgs,
    #[command(flatten)]
    track: TrackArgs,
}

fn parse_target(s: &str) -> Result<(f64, f64), String> {
    let (x, y) = s.split_once(',').ok_or("expected `x,y`")?;
    let num = |v: &str| v.trim().parse::<f64>().map_err(|e| format!("`{v}`: {e}"));
    Ok((num(x)?, num(y)?))
}

/// Exit status: 1 for usage and configuration problems, 2 for bad input data.
#[derive(Debug)]
pub enum Failure {
    Config(anyhow::Error),
    Input(anyhow::Error),
}

impl Failure {
    fn code(&self) -> u8 {
        match self {
            Failure::Config(_) => 1,
            Failure::Input(_) => 2,
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    let result = match cli.command {
        Command::Estimate(a) => commands::estimate(a),
        Command::Simulate(a) => commands::simulate(a),
        Command::ExperimentA(a) => commands::experiment_a(a),
        Command::ExperimentB(a) => commands::experiment_b(a),
        Command::Bench(a) => commands::bench(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            let (Failure::Config(e) | Failure::Input(e)) = &f;
            // A closed downstream pipe (e.g. `| head`) is not an error.
            if e.chain().any(|c| {
                c.downcast_ref::<std::io::Error>().is_some_and(|io| io.kind() == std::io::ErrorKind::BrokenPipe)
            }) {
                return ExitCode::SUCCESS;
            }
            eprintln!("error: {e:#}");
            ExitCode::from(f.code())
        }
    }
}
