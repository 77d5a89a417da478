//! `fovdock`: run docking episodes, sweep and fit the feasible set, verify
//! the Lyapunov condition and run the perception pipeline.

mod commands;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use fovdock_core::DockError;

/// Exit status for errors that stop a command before it produces results.
pub const EXIT_ERROR: u8 = 1;

#[derive(Parser, Debug)]
#[command(name = "fovdock", version, about = "FOV-constrained docking toolkit")]
struct Cli {
    /// Config file (TOML) or bundled preset name.
    #[arg(long, global = true, default_value = "case1")]
    config: String,

    /// Output directory for artifacts.
    #[arg(long, global = true, env = "FOVDOCK_OUT", default_value = "fovdock-out")]
    out: PathBuf,

    /// Overrides the config seed.
    #[arg(long, global = true)]
    seed: Option<u64>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Simulate one episode from a polar initial state.
    Run(RunArgs),
    /// Label every point of the configured grid as feasible or not.
    Sweep,
    /// Fit the feasible-set boundary to sweep labels.
    Fit(FitArgs),
    /// Check the Lyapunov rate inside a fitted region.
    Verify(VerifyArgs),
    /// Estimate the landmark from a point cloud or a synthetic chair.
    Perceive(PerceiveArgs),
    /// Write the fully defaulted config.
    Config,
}

/// Angles are radians unless suffixed with `deg`.
fn parse_angle(s: &str) -> Result<f64, String> {
    let (num, deg) = match s.trim().strip_suffix("deg") {
        Some(n) => (n.trim(), true),
        None => (s.trim(), false),
    };
    let v: f64 = num.parse().map_err(|_| format!("`{s}` is not an angle"))?;
    Ok(if deg { v.to_radians() } else { v })
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, ValueEnum)]
enum EstimatorKind {
    None,
    /// Noisy ground-truth landmark measurements.
    Truth,
    /// Synthetic chair clouds through the perception pipeline.
    Cloud,
}

#[derive(Args, Debug)]
struct RunArgs {
    #[arg(long, allow_hyphen_values = true)]
    rho: f64,
    #[arg(long, value_parser = parse_angle, allow_hyphen_values = true)]
    alpha: f64,
    #[arg(long, value_parser = parse_angle, allow_hyphen_values = true)]
    phi: f64,
    /// Ignore the configured dead zone and speed limits.
    #[arg(long)]
    ideal: bool,
    /// Keep driving after entering the safety region until the wheels stall.
    #[arg(long)]
    settle: bool,
    #[arg(long, value_enum, default_value_t = EstimatorKind::None)]
    estimator: EstimatorKind,
    /// Point noise of synthetic clouds for `--estimator cloud`, meters.
    #[arg(long, default_value_t = 0.01)]
    cloud_noise: f64,
}

#[derive(Args, Debug)]
struct FitArgs {
    /// Feasibility labels; defaults to `feasible.csv` in the output directory.
    #[arg(long)]
    labels: Option<PathBuf>,
    /// Grid cells of clearance kept around infeasible points.
    #[arg(long, default_value_t = 1)]
    margin: usize,
    /// Skip the dense Lyapunov guard.
    #[arg(long)]
    no_guard: bool,
}

#[derive(Args, Debug)]
struct VerifyArgs {
    /// Fitted boundary; defaults to `fit.json` in the output directory.
    #[arg(long)]
    fit: Option<PathBuf>,
    #[arg(long, default_value_t = 100_000)]
    samples: usize,
}

#[derive(Args, Debug)]
struct PerceiveArgs {
    /// XYZ or PLY cloud in the camera frame; a synthetic chair is used otherwise.
    #[arg(long)]
    cloud: Option<PathBuf>,
    /// Synthetic chair: distance from the camera to the seat center, meters.
    #[arg(long, default_value_t = 2.0)]
    distance: f64,
    /// Synthetic chair: lateral offset, meters (positive to the right).
    #[arg(long, default_value_t = 0.0, allow_hyphen_values = true)]
    lateral: f64,
    /// Synthetic chair: rotation away from facing the robot.
    #[arg(long, value_parser = parse_angle, default_value = "0", allow_hyphen_values = true)]
    yaw: f64,
    /// Synthetic chair: point noise, meters.
    #[arg(long, default_value_t = 0.0)]
    noise: f64,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match commands::dispatch(&cli) {
        Ok(code) => ExitCode::from(code),
        Err(err) => {
            emit_error(&err);
            ExitCode::from(EXIT_ERROR)
        }
    }
}

/// One-line JSON error record on stderr.
fn emit_error(err: &DockError) {
    let record = serde_json::json!({
        "error": {
            "kind": err.kind(),
            "message": err.to_string(),
        }
    });
    eprintln!("{record}");
}
