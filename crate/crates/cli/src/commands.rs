//! Subcommand implementations. Each writes its artifacts plus a manifest
//! into the output directory and returns the process exit status.

use std::collections::BTreeMap;
use std::f64::consts::FRAC_PI_2;
use std::path::{Path, PathBuf};

use fovdock_core::export::{feasible_csv, parse_feasible_csv, to_json, trajectory_csv, write_artifact, RunManifest};
use fovdock_core::feasible::sweep_params;
use fovdock_core::perception::io::{format_xyz, read_cloud};
use fovdock_core::perception::{synth_chair_cloud, CloudSampling};
use fovdock_core::{
    fit_boundary, load_config, perceive, run_episode, sweep, verify_lyapunov, ActuatorModel, BoundaryFit, CameraSpec,
    DockError, DockingConfig, EpisodeParams, EstimatorSetup, FitSettings, InitialState, LandmarkEstimate, LandmarkSpec,
    MeasurementSource, Outcome, PolarState, Pose2D, Result, Termination,
};
use serde::{Deserialize, Serialize};

use crate::{Cli, Command, EstimatorKind, FitArgs, PerceiveArgs, RunArgs, VerifyArgs};

pub const EXIT_OK: u8 = 0;
pub const EXIT_FOV_VIOLATION: u8 = 3;
pub const EXIT_TIMEOUT: u8 = 4;
pub const EXIT_STALL: u8 = 5;
pub const EXIT_FAULT: u8 = 6;
pub const EXIT_LYAPUNOV_VIOLATION: u8 = 7;

fn outcome_status(outcome: Outcome) -> u8 {
    match outcome {
        Outcome::Converged => EXIT_OK,
        Outcome::FovViolation => EXIT_FOV_VIOLATION,
        Outcome::Timeout => EXIT_TIMEOUT,
        Outcome::DeadZoneStall => EXIT_STALL,
        Outcome::Fault => EXIT_FAULT,
    }
}

struct Context {
    cfg: DockingConfig,
    out: PathBuf,
    manifest: RunManifest,
}

impl Context {
    fn write(&mut self, name: &str, contents: &str) -> Result<()> {
        write_artifact(&self.out, name, contents.as_bytes(), &mut self.manifest)
    }

    fn finish(self) -> Result<()> {
        let name = format!("{}.manifest.json", self.manifest.command);
        std::fs::write(self.out.join(name), to_json(&self.manifest))?;
        Ok(())
    }

    fn default_input(&self, given: &Option<PathBuf>, name: &str) -> PathBuf {
        given.clone().unwrap_or_else(|| self.out.join(name))
    }
}

pub fn dispatch(cli: &Cli) -> Result<u8> {
    let mut cfg = load_config(&cli.config)?;
    if let Some(seed) = cli.seed {
        cfg.seed = seed;
    }
    std::fs::create_dir_all(&cli.out).map_err(|e| DockError::Io(format!("{}: {e}", cli.out.display())))?;
    let name = match cli.command {
        Command::Run(_) => "run",
        Command::Sweep => "sweep",
        Command::Fit(_) => "fit",
        Command::Verify(_) => "verify",
        Command::Perceive(_) => "perceive",
        Command::Config => "config",
    };
    let manifest = RunManifest::new(name, cfg.hash(), cfg.seed);
    let mut ctx = Context {
        cfg,
        out: cli.out.clone(),
        manifest,
    };
    let status = match &cli.command {
        Command::Run(args) => cmd_run(&mut ctx, args)?,
        Command::Sweep => cmd_sweep(&mut ctx)?,
        Command::Fit(args) => cmd_fit(&mut ctx, args)?,
        Command::Verify(args) => cmd_verify(&mut ctx, args)?,
        Command::Perceive(args) => cmd_perceive(&mut ctx, args)?,
        Command::Config => {
            let dump = ctx.cfg.to_toml();
            ctx.write("config.toml", &dump)?;
            EXIT_OK
        }
    };
    ctx.finish()?;
    Ok(status)
}

#[derive(Serialize)]
struct RunSummary {
    outcome: Outcome,
    #[serde(skip_serializing_if = "Option::is_none")]
    fault: Option<String>,
    steps: usize,
    duration: f64,
    initial: PolarState,
    #[serde(rename = "final")]
    final_state: PolarState,
    final_pose: Pose2D,
    final_alpha_star: f64,
    max_abs_bearing: f64,
    alpha_bar: f64,
    k3: f64,
    estimator: &'static str,
}

fn cmd_run(ctx: &mut Context, args: &RunArgs) -> Result<u8> {
    let cfg = &ctx.cfg;
    let initial = PolarState::new(args.rho, args.alpha, args.phi)?;
    let mut params = EpisodeParams::from_config(cfg)?;
    if args.ideal {
        params = params.with_actuator(ActuatorModel::ideal());
    }
    if args.settle {
        params = params.with_termination(Termination::Settle);
    }
    let source = match args.estimator {
        EstimatorKind::None => None,
        EstimatorKind::Truth => Some(MeasurementSource::NoisyTruth),
        EstimatorKind::Cloud => Some(MeasurementSource::SyntheticCloud {
            chair: cfg.chair,
            perception: cfg.perception,
            noise_sigma: args.cloud_noise,
            density: CloudSampling::default().density,
        }),
    };
    let setup = source.map(|source| EstimatorSetup {
        params: cfg.estimation,
        source,
        seed: cfg.seed,
    });
    let result = run_episode(&InitialState::Polar(initial), &params, setup.as_ref())?;
    let last = result.final_sample();
    let summary = RunSummary {
        outcome: result.outcome,
        fault: result.fault.clone(),
        steps: result.trajectory.len() - 1,
        duration: last.t,
        initial,
        final_state: last.state,
        final_pose: last.pose,
        final_alpha_star: last.alpha_star,
        max_abs_bearing: result.max_abs_bearing,
        alpha_bar: cfg.camera.alpha_bar,
        k3: params.gains.k3,
        estimator: match args.estimator {
            EstimatorKind::None => "none",
            EstimatorKind::Truth => "truth",
            EstimatorKind::Cloud => "cloud",
        },
    };
    ctx.write("trajectory.csv", &trajectory_csv(&result))?;
    ctx.write("summary.json", &to_json(&summary))?;
    Ok(outcome_status(result.outcome))
}

#[derive(Serialize)]
struct SweepSummary {
    grid_points: usize,
    feasible: usize,
    outcomes: BTreeMap<&'static str, usize>,
}

fn cmd_sweep(ctx: &mut Context) -> Result<u8> {
    let labels = sweep(&ctx.cfg.grid, &sweep_params(&ctx.cfg)?)?;
    let mut outcomes = BTreeMap::new();
    for l in &labels {
        *outcomes.entry(l.outcome.as_str()).or_insert(0) += 1;
    }
    let summary = SweepSummary {
        grid_points: labels.len(),
        feasible: labels.iter().filter(|l| l.feasible).count(),
        outcomes,
    };
    ctx.write("feasible.csv", &feasible_csv(&labels))?;
    ctx.write("sweep_summary.json", &to_json(&summary))?;
    Ok(EXIT_OK)
}

/// Contents of `fit.json`.
#[derive(Debug, Serialize, Deserialize)]
struct FitArtifact {
    fit: BoundaryFit,
    camera: CameraSpec,
    landmark: LandmarkSpec,
    settings: FitSettings,
    grid_points_inside: usize,
    feasible_inside: usize,
    infeasible_inside: usize,
    feasible_total: usize,
}

fn cmd_fit(ctx: &mut Context, args: &FitArgs) -> Result<u8> {
    let cfg = &ctx.cfg;
    let path = ctx.default_input(&args.labels, "feasible.csv");
    let labels = parse_feasible_csv(&read_text(&path)?, &cfg.grid)?;
    let settings = FitSettings {
        margin_cells: args.margin,
        lyapunov_guard: !args.no_guard,
        ..FitSettings::default()
    };
    let fit = fit_boundary(
        &labels,
        &cfg.grid,
        &cfg.camera,
        &cfg.landmark,
        &cfg.resolved_gains()?,
        &settings,
    )?;
    let inside: Vec<_> = labels
        .iter()
        .filter(|l| fit.contains(&l.state, &cfg.camera, &cfg.landmark))
        .collect();
    let feasible_inside = inside.iter().filter(|l| l.feasible).count();
    let artifact = FitArtifact {
        fit,
        camera: cfg.camera,
        landmark: cfg.landmark,
        settings,
        grid_points_inside: inside.len(),
        feasible_inside,
        infeasible_inside: inside.len() - feasible_inside,
        feasible_total: labels.iter().filter(|l| l.feasible).count(),
    };
    ctx.write("fit.json", &to_json(&artifact))?;
    Ok(EXIT_OK)
}

fn cmd_verify(ctx: &mut Context, args: &VerifyArgs) -> Result<u8> {
    let cfg = &ctx.cfg;
    let path = ctx.default_input(&args.fit, "fit.json");
    let artifact: FitArtifact =
        serde_json::from_str(&read_text(&path)?).map_err(|e| DockError::Parse(format!("{}: {e}", path.display())))?;
    if artifact.camera != cfg.camera || artifact.landmark != cfg.landmark {
        return Err(DockError::InvalidParameter {
            field: "fit".into(),
            reason: format!("{} was fitted for a different camera or landmark", path.display()),
        });
    }
    let report = verify_lyapunov(
        &artifact.fit,
        &cfg.camera,
        &cfg.landmark,
        &cfg.resolved_gains()?,
        args.samples,
    )?;
    ctx.write("lyapunov.json", &to_json(&report))?;
    Ok(if report.passed() {
        EXIT_OK
    } else {
        EXIT_LYAPUNOV_VIOLATION
    })
}

#[derive(Serialize)]
struct PerceiveSummary {
    estimate: LandmarkEstimate,
    points: usize,
    /// Seat center of the synthetic chair in the robot frame.
    #[serde(skip_serializing_if = "Option::is_none")]
    objective_truth: Option<[f64; 2]>,
    #[serde(skip_serializing_if = "Option::is_none")]
    objective_error: Option<f64>,
}

fn cmd_perceive(ctx: &mut Context, args: &PerceiveArgs) -> Result<u8> {
    let cfg = ctx.cfg.clone();
    let (cloud, truth) = match &args.cloud {
        Some(path) => (read_cloud(path)?, None),
        None => {
            let robot = Pose2D::new(0.0, 0.0, FRAC_PI_2);
            let center = Pose2D::new(args.lateral, cfg.camera.l + args.distance, -FRAC_PI_2 + args.yaw);
            let sampling = CloudSampling {
                noise_sigma: args.noise,
                seed: cfg.seed,
                ..CloudSampling::default()
            };
            let cloud = synth_chair_cloud(&cfg.object.at(center), &cfg.chair, &robot, &cfg.camera, &sampling)?;
            ctx.write("cloud.xyz", &format_xyz(&cloud))?;
            (cloud, Some(robot.to_local(center.position())))
        }
    };
    let estimate = perceive(&cloud, &cfg.perception, &cfg.camera, &cfg.landmark)?;
    let summary = PerceiveSummary {
        estimate,
        points: cloud.len(),
        objective_truth: truth.map(Into::into),
        objective_error: truth.map(|t| (estimate.objective() - t).norm()),
    };
    ctx.write("estimate.json", &to_json(&summary))?;
    Ok(EXIT_OK)
}

fn read_text(path: &Path) -> Result<String> {
    std::fs::read_to_string(path).map_err(|e| DockError::Io(format!("{}: {e}", path.display())))
}
