//! Closed-loop docking episodes: unicycle integration in the world frame,
//! wheel dead-zone, corner-wise field-of-view monitoring and termination
//! on the safety region.

use nalgebra::Vector2;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::config::DockingConfig;
use crate::controller::{control_law_with_bearing, ControlCommand, Gains};
use crate::error::{DockError, Result};
use crate::estimation::{odometry_process_noise, EstimationParams, EstimatorState, OdometryDelta, Phase};
use crate::geometry::{
    bearing_angle, bearing_of_local_point, polar_from_local, polar_from_world, scene_from_polar, wrap, CameraSpec,
    DockingScene, LandmarkSpec, ObjectFootprint, ObjectSize, PolarState, Pose2D,
};
use crate::perception::{
    perceive, synth_chair_cloud, ChairGeometry, CloudSampling, LandmarkEstimate, PerceptionParams,
};

/// Per-wheel speed limits of a differential drive.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ActuatorModel {
    /// Wheel speeds with magnitude below this are not realized.
    pub v_min: f64,
    pub v_max: f64,
    /// Half the distance between the wheels.
    pub half_track: f64,
}

impl Default for ActuatorModel {
    fn default() -> Self {
        Self {
            v_min: 0.02,
            v_max: 1.0,
            half_track: 0.25,
        }
    }
}

impl ActuatorModel {
    /// No dead-zone and no saturation.
    pub fn ideal() -> Self {
        Self {
            v_min: 0.0,
            v_max: f64::INFINITY,
            half_track: 0.25,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.v_min >= 0.0 && self.v_min < self.v_max) {
            return Err(DockError::invalid("actuator.v_min", "need 0 <= v_min < v_max"));
        }
        if !(self.half_track > 0.0 && self.half_track.is_finite()) {
            return Err(DockError::invalid("actuator.half_track", "must be > 0"));
        }
        Ok(())
    }
}

/// Terminal box around the landmark; membership is strict on every axis.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SafetyRegion {
    pub rho_max: f64,
    pub alpha_max: f64,
    pub phi_max: f64,
}

impl Default for SafetyRegion {
    fn default() -> Self {
        Self {
            rho_max: 0.15,
            alpha_max: 10f64.to_radians(),
            phi_max: 10f64.to_radians(),
        }
    }
}

impl SafetyRegion {
    pub fn validate(&self) -> Result<()> {
        if !(self.rho_max > 0.0 && self.alpha_max > 0.0 && self.phi_max > 0.0) {
            return Err(DockError::invalid("safety", "all bounds must be > 0"));
        }
        Ok(())
    }

    pub fn contains(&self, s: &PolarState) -> bool {
        s.rho < self.rho_max && s.alpha.abs() < self.alpha_max && s.phi.abs() < self.phi_max
    }
}

/// Wheel-space dead-zone and saturation.
pub fn apply_dead_zone(cmd: ControlCommand, act: &ActuatorModel) -> ControlCommand {
    let wheel = |s: f64| {
        let s = if s.abs() < act.v_min { 0.0 } else { s };
        s.clamp(-act.v_max, act.v_max)
    };
    let left = wheel(cmd.v - cmd.w * act.half_track);
    let right = wheel(cmd.v + cmd.w * act.half_track);
    ControlCommand {
        v: 0.5 * (left + right),
        w: (right - left) / (2.0 * act.half_track),
    }
}

/// Result of a corner-wise field-of-view test.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FovCheck {
    pub ok: bool,
    /// Corner bearing with the largest magnitude, signed.
    pub worst_bearing: f64,
}

/// Corners closer than this to the camera have no usable bearing.
const COINCIDENT: f64 = 1e-12;

/// Bearings of all four footprint corners seen from the camera.
pub fn fov_check(robot: &Pose2D, object: &ObjectFootprint, cam: &CameraSpec) -> Result<FovCheck> {
    let mut worst = 0.0f64;
    for corner in object.corners() {
        let local = robot.to_local(corner);
        if (local - cam.position()).norm() < COINCIDENT {
            return Err(DockError::Domain("object corner coincides with the camera".into()));
        }
        let b = bearing_of_local_point(local, cam)?;
        if b.abs() > worst.abs() {
            worst = b;
        }
    }
    Ok(FovCheck {
        ok: worst.abs() <= cam.alpha_bar,
        worst_bearing: worst,
    })
}

/// `(rho', alpha', phi')` of the polar kinematics.
pub fn polar_derivatives(state: &PolarState, cmd: &ControlCommand) -> Result<[f64; 3]> {
    if !(state.rho > 0.0) {
        return Err(DockError::Domain("polar kinematics are singular at rho = 0".into()));
    }
    let (sa, ca) = state.alpha.sin_cos();
    let turn = cmd.v * sa / state.rho;
    Ok([-cmd.v * ca, turn - cmd.w, -turn])
}

/// When an episode stops.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Termination {
    /// Stop as soon as the state enters the safety region.
    #[default]
    OnEntry,
    /// Keep driving until the wheels stall or time runs out; converged if
    /// the final state lies in the safety region.
    Settle,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Outcome {
    Converged,
    FovViolation,
    Timeout,
    DeadZoneStall,
    /// A domain error stopped the episode.
    Fault,
}

impl Outcome {
    pub fn as_str(&self) -> &'static str {
        match self {
            Outcome::Converged => "converged",
            Outcome::FovViolation => "fov_violation",
            Outcome::Timeout => "timeout",
            Outcome::DeadZoneStall => "dead_zone_stall",
            Outcome::Fault => "fault",
        }
    }
}

impl std::fmt::Display for Outcome {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Everything an episode needs besides the initial state.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EpisodeParams {
    pub camera: CameraSpec,
    pub landmark: LandmarkSpec,
    pub object: ObjectSize,
    pub gains: Gains,
    pub actuator: ActuatorModel,
    pub safety: SafetyRegion,
    pub dt: f64,
    pub t_max: f64,
    pub stall_window: f64,
    pub termination: Termination,
}

impl EpisodeParams {
    pub fn from_config(cfg: &DockingConfig) -> Result<Self> {
        Ok(Self {
            camera: cfg.camera,
            landmark: cfg.landmark,
            object: cfg.object,
            gains: cfg.resolved_gains()?,
            actuator: cfg.actuator,
            safety: cfg.safety,
            dt: cfg.integration.dt,
            t_max: cfg.integration.t_max,
            stall_window: cfg.integration.stall_window,
            termination: Termination::OnEntry,
        })
    }

    pub fn with_actuator(self, actuator: ActuatorModel) -> Self {
        Self { actuator, ..self }
    }

    pub fn with_termination(self, termination: Termination) -> Self {
        Self { termination, ..self }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.dt > 0.0 && self.dt.is_finite()) {
            return Err(DockError::invalid("dt", "must be > 0"));
        }
        if !(self.t_max >= 0.0 && self.stall_window > 0.0) {
            return Err(DockError::invalid("t_max", "need t_max >= 0 and stall_window > 0"));
        }
        self.camera.validate()?;
        self.landmark.validate()?;
        self.object.validate()?;
        self.gains.validate()?;
        self.actuator.validate()?;
        self.safety.validate()
    }
}

/// Where an episode starts.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum InitialState {
    /// Robot at the world origin facing +y, scene placed to realize the state.
    Polar(PolarState),
    World {
        robot: Pose2D,
        scene: DockingScene,
    },
}

impl InitialState {
    fn resolve(&self, lm: &LandmarkSpec) -> (Pose2D, DockingScene) {
        match *self {
            InitialState::Polar(s) => (
                Pose2D::new(0.0, 0.0, std::f64::consts::FRAC_PI_2),
                scene_from_polar(&s, lm),
            ),
            InitialState::World { robot, scene } => (robot, scene),
        }
    }
}

/// Landmark measurements fed to the estimator.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum MeasurementSource {
    /// True robot-frame positions plus Gaussian noise of `measurement_sigma`.
    NoisyTruth,
    /// Synthetic chair clouds run through the perception pipeline.
    SyntheticCloud {
        chair: ChairGeometry,
        perception: PerceptionParams,
        noise_sigma: f64,
        density: f64,
    },
}

/// Closed-loop estimation settings.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EstimatorSetup {
    pub params: EstimationParams,
    pub source: MeasurementSource,
    pub seed: u64,
}

/// Filter snapshot recorded with each trajectory sample.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EstimateSample {
    pub objective: [f64; 2],
    pub landmark: [f64; 2],
    pub phase: Phase,
    pub min_eigenvalue: f64,
    /// A measurement was fused at this step.
    pub updated: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrajectorySample {
    pub t: f64,
    pub pose: Pose2D,
    pub state: PolarState,
    /// Bearing of the objective.
    pub alpha_star: f64,
    /// Largest-magnitude corner bearing.
    pub worst_bearing: f64,
    pub cmd: ControlCommand,
    pub act: ControlCommand,
    pub estimate: Option<EstimateSample>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpisodeResult {
    pub trajectory: Vec<TrajectorySample>,
    pub outcome: Outcome,
    /// Largest corner bearing magnitude over the whole trajectory.
    pub max_abs_bearing: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub fault: Option<String>,
}

impl EpisodeResult {
    pub fn final_sample(&self) -> &TrajectorySample {
        self.trajectory.last().expect("trajectory is never empty")
    }
}

struct Estimation<'a> {
    setup: &'a EstimatorSetup,
    rng: ChaCha8Rng,
    state: EstimatorState,
}

impl<'a> Estimation<'a> {
    fn start(setup: &'a EstimatorSetup, robot: &Pose2D, scene: &DockingScene, p: &EpisodeParams) -> Result<Self> {
        setup.params.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(setup.seed);
        let first = measure(setup, &mut rng, robot, scene, p, 0).ok_or(DockError::NoObject)?;
        Ok(Self {
            setup,
            rng,
            state: EstimatorState::from_measurement(&first, setup.params.initial_sigma),
        })
    }

    fn snapshot(&self, updated: bool) -> EstimateSample {
        EstimateSample {
            objective: self.state.objective().into(),
            landmark: self.state.landmark().into(),
            phase: self.state.phase,
            min_eigenvalue: self.state.min_covariance_eigenvalue(),
            updated,
        }
    }

    /// Propagates with noisy odometry, then gates and fuses. Returns whether a
    /// measurement was fused.
    fn step(
        &mut self,
        before: &Pose2D,
        after: &Pose2D,
        scene: &DockingScene,
        p: &EpisodeParams,
        k: usize,
    ) -> Result<bool> {
        let frac = self.setup.params.odometry_noise_frac;
        let shift = before.to_local(after.position());
        let dtheta = wrap(after.theta - before.theta);
        let mut odo = OdometryDelta {
            dx: shift.x,
            dy: shift.y,
            dtheta,
        };
        if frac > 0.0 {
            let trans = shift.norm() * frac;
            let rot = dtheta.abs() * frac;
            odo.dx += gaussian(&mut self.rng, trans);
            odo.dy += gaussian(&mut self.rng, trans);
            odo.dtheta += gaussian(&mut self.rng, rot);
        }
        let q = odometry_process_noise(&self.state, &odo, frac);
        self.state = self.state.predict(&odo, &q);
        self.state = self
            .state
            .two_phase_gate(self.state.landmark().norm(), self.setup.params.gate_threshold);

        if self.state.phase == Phase::Fusing && k.is_multiple_of(self.setup.params.measurement_period) {
            if let Some(m) = measure(self.setup, &mut self.rng, after, scene, p, k) {
                self.state = self.state.update(&m, &self.setup.params.measurement_covariance())?;
                return Ok(true);
            }
        }
        Ok(false)
    }
}

fn gaussian(rng: &mut ChaCha8Rng, sigma: f64) -> f64 {
    if sigma > 0.0 {
        Normal::new(0.0, sigma).map(|n| n.sample(rng)).unwrap_or(0.0)
    } else {
        0.0
    }
}

/// One landmark measurement, or `None` when perception finds nothing usable.
fn measure(
    setup: &EstimatorSetup,
    rng: &mut ChaCha8Rng,
    robot: &Pose2D,
    scene: &DockingScene,
    p: &EpisodeParams,
    k: usize,
) -> Option<LandmarkEstimate> {
    match setup.source {
        MeasurementSource::NoisyTruth => {
            let sigma = setup.params.measurement_sigma;
            let mut noisy = |v: Vector2<f64>| Vector2::new(v.x + gaussian(rng, sigma), v.y + gaussian(rng, sigma));
            let d = noisy(robot.to_local(scene.objective.position()));
            let c = noisy(robot.to_local(scene.landmark.position()));
            let heading = DockingScene::from_points(c, d, &p.landmark).landmark.theta;
            Some(LandmarkEstimate {
                objective_xy: d.into(),
                landmark_xy: c.into(),
                landmark_heading: heading,
            })
        }
        MeasurementSource::SyntheticCloud {
            chair,
            perception,
            noise_sigma,
            density,
        } => {
            let sampling = CloudSampling {
                density,
                noise_sigma,
                seed: setup.seed ^ (k as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15) ^ rng.random::<u64>(),
            };
            let footprint = p.object.at(scene.objective);
            let cloud = synth_chair_cloud(&footprint, &chair, robot, &p.camera, &sampling).ok()?;
            perceive(&cloud, &perception, &p.camera, &p.landmark).ok()
        }
    }
}

/// Integrates one docking episode with explicit Euler steps.
///
/// Errors before the first sample are returned; later ones end the episode
/// with [`Outcome::Fault`].
pub fn run_episode(
    initial: &InitialState,
    params: &EpisodeParams,
    estimator: Option<&EstimatorSetup>,
) -> Result<EpisodeResult> {
    params.validate()?;
    let (mut robot, scene) = initial.resolve(&params.landmark);
    let footprint = params.object.at(scene.objective);
    let mut est = estimator
        .map(|setup| Estimation::start(setup, &robot, &scene, params))
        .transpose()?;

    let mut trajectory = Vec::new();
    let mut max_abs_bearing = 0.0f64;
    let mut stalled_for = 0.0;
    let mut updated = false;
    let mut k = 0usize;

    let finish = |trajectory: Vec<TrajectorySample>, outcome, max_abs_bearing, fault| EpisodeResult {
        trajectory,
        outcome,
        max_abs_bearing,
        fault,
    };

    loop {
        let t = k as f64 * params.dt;
        let sample = (|| -> Result<(TrajectorySample, bool)> {
            let state = polar_from_world(
                &robot,
                &scene.landmark,
                &scene.objective,
                &params.camera,
                &params.landmark,
            )?;
            let fov = fov_check(&robot, &footprint, &params.camera)?;
            let alpha_star = bearing_angle(&state, &params.camera, &params.landmark)?;
            let (ctrl_state, ctrl_bearing) = match &est {
                None => (state, alpha_star),
                Some(e) => {
                    let s = polar_from_local(e.state.landmark(), e.state.objective(), &params.landmark)?;
                    (s, bearing_angle(&s, &params.camera, &params.landmark)?)
                }
            };
            let cmd = control_law_with_bearing(&ctrl_state, ctrl_bearing, &params.gains, &params.camera);
            let act = apply_dead_zone(cmd, &params.actuator);
            Ok((
                TrajectorySample {
                    t,
                    pose: robot,
                    state,
                    alpha_star,
                    worst_bearing: fov.worst_bearing,
                    cmd,
                    act,
                    estimate: est.as_ref().map(|e| e.snapshot(updated)),
                },
                fov.ok,
            ))
        })();

        let (sample, fov_ok) = match sample {
            Ok(s) => s,
            Err(e) if k == 0 => return Err(e),
            Err(e) => return Ok(finish(trajectory, Outcome::Fault, max_abs_bearing, Some(e.to_string()))),
        };
        max_abs_bearing = max_abs_bearing.max(sample.worst_bearing.abs());
        let in_omega = params.safety.contains(&sample.state);
        let act = sample.act;
        trajectory.push(sample);

        if !fov_ok {
            return Ok(finish(trajectory, Outcome::FovViolation, max_abs_bearing, None));
        }
        if in_omega && params.termination == Termination::OnEntry {
            return Ok(finish(trajectory, Outcome::Converged, max_abs_bearing, None));
        }
        if act.v == 0.0 && act.w == 0.0 {
            stalled_for += params.dt;
        } else {
            stalled_for = 0.0;
        }
        let settled = |in_omega: bool, otherwise| if in_omega { Outcome::Converged } else { otherwise };
        if stalled_for >= params.stall_window - 1e-9 {
            let outcome = match params.termination {
                Termination::OnEntry => Outcome::DeadZoneStall,
                Termination::Settle => settled(in_omega, Outcome::DeadZoneStall),
            };
            return Ok(finish(trajectory, outcome, max_abs_bearing, None));
        }
        if t >= params.t_max {
            let outcome = match params.termination {
                Termination::OnEntry => Outcome::Timeout,
                Termination::Settle => settled(in_omega, Outcome::Timeout),
            };
            return Ok(finish(trajectory, outcome, max_abs_bearing, None));
        }

        let before = robot;
        let (s, c) = robot.theta.sin_cos();
        robot = Pose2D::new(
            robot.x + act.v * c * params.dt,
            robot.y + act.v * s * params.dt,
            robot.theta + act.w * params.dt,
        );
        k += 1;
        if let Some(e) = est.as_mut() {
            updated = match e.step(&before, &robot, &scene, params, k) {
                Ok(u) => u,
                Err(err) => {
                    return Ok(finish(
                        trajectory,
                        Outcome::Fault,
                        max_abs_bearing,
                        Some(err.to_string()),
                    ))
                }
            };
        }
    }
}
