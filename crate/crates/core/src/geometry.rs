//! Planar frames, poses, angle arithmetic and the docking parameterization.
//!
//! Conventions used everywhere in the crate:
//!
//! * The world frame is inertial. A [`Pose2D`] heading `theta` is measured
//!   counter-clockwise from the world +x axis, so the unicycle model reads
//!   `x' = v cos(theta)`, `y' = v sin(theta)`, `theta' = w`.
//! * The robot frame `S_o` is centered at the wheel axle midpoint `O` with
//!   +y along the heading and +x pointing to the robot's right. The camera
//!   `A` sits on the +y axis at distance `l`, looking along +y.
//! * `C` is the virtual landmark (docking goal), `D` the objective (the
//!   object reference point that has to stay in view).

use std::f64::consts::{FRAC_PI_2, PI, TAU};

use nalgebra::Vector2;
use serde::{Deserialize, Serialize};

use crate::error::{DockError, Result};

/// Values this close to `-pi` are reported as `+pi` so the range stays `(-pi, pi]`.
const WRAP_EPS: f64 = 1e-12;

/// Wraps an angle into `(-pi, pi]`.
pub fn normalize_angle(raw: f64) -> Result<f64> {
    if !raw.is_finite() {
        return Err(DockError::Domain(format!("angle {raw} is not finite")));
    }
    Ok(wrap(raw))
}

/// Infallible variant of [`normalize_angle`] for values already known to be finite.
#[inline]
pub(crate) fn wrap(raw: f64) -> f64 {
    let mut a = raw.rem_euclid(TAU);
    if a > PI {
        a -= TAU;
    }
    if a <= -PI + WRAP_EPS {
        a = PI;
    }
    a
}

/// Planar pose of a robot, landmark or objective.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Pose2D {
    pub x: f64,
    pub y: f64,
    pub theta: f64,
}

impl Pose2D {
    pub fn new(x: f64, y: f64, theta: f64) -> Self {
        Self {
            x,
            y,
            theta: wrap(theta),
        }
    }

    pub fn position(&self) -> Vector2<f64> {
        Vector2::new(self.x, self.y)
    }

    /// Unit vector along the heading (the robot-frame +y axis).
    pub fn forward(&self) -> Vector2<f64> {
        Vector2::new(self.theta.cos(), self.theta.sin())
    }

    /// Unit vector to the right of the heading (the robot-frame +x axis).
    pub fn right(&self) -> Vector2<f64> {
        Vector2::new(self.theta.sin(), -self.theta.cos())
    }

    /// Maps a point given in this pose's robot frame into the parent frame.
    pub fn to_parent(&self, local: Vector2<f64>) -> Vector2<f64> {
        self.position() + self.right() * local.x + self.forward() * local.y
    }

    /// Maps a parent-frame point into this pose's robot frame.
    pub fn to_local(&self, point: Vector2<f64>) -> Vector2<f64> {
        let d = point - self.position();
        Vector2::new(d.dot(&self.right()), d.dot(&self.forward()))
    }

    /// Converts a parent-frame heading into a robot-frame direction angle
    /// (measured from the robot-frame +x axis, so straight ahead is `pi/2`).
    pub fn heading_to_local(&self, heading: f64) -> f64 {
        wrap(heading - self.theta + FRAC_PI_2)
    }

    /// Inverse of [`Pose2D::heading_to_local`].
    pub fn heading_to_parent(&self, local_angle: f64) -> f64 {
        wrap(local_angle + self.theta - FRAC_PI_2)
    }

    /// Camera point `A` in the parent frame.
    pub fn camera_point(&self, cam: &CameraSpec) -> Vector2<f64> {
        self.position() + self.forward() * cam.l
    }
}

/// Camera mounting on the robot: offset `l` along the centerline, half
/// horizontal field of view, pitch and mount height.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CameraSpec {
    pub l: f64,
    pub alpha_bar: f64,
    pub gamma: f64,
    pub z_a: f64,
}

impl CameraSpec {
    pub fn new(l: f64, alpha_bar: f64, gamma: f64, z_a: f64) -> Result<Self> {
        let cam = Self {
            l,
            alpha_bar,
            gamma,
            z_a,
        };
        cam.validate()?;
        Ok(cam)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.l.is_finite() && self.l >= 0.0) {
            return Err(DockError::invalid("camera.l", "must be finite and >= 0"));
        }
        if !(self.alpha_bar > 0.0 && self.alpha_bar < FRAC_PI_2) {
            return Err(DockError::invalid("camera.alpha_bar", "must lie in (0, pi/2)"));
        }
        if !(self.gamma.abs() < FRAC_PI_2) {
            return Err(DockError::invalid("camera.gamma", "|gamma| must be < pi/2"));
        }
        if !self.z_a.is_finite() {
            return Err(DockError::invalid("camera.z_a", "must be finite"));
        }
        Ok(())
    }

    /// Camera point `A` in the robot frame.
    pub fn position(&self) -> Vector2<f64> {
        Vector2::new(0.0, self.l)
    }
}

/// Offset of the virtual landmark relative to the objective.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LandmarkSpec {
    /// Distance `|CD|`.
    pub r: f64,
    /// Posture angle of the landmark relative to `CD`.
    pub beta: f64,
    /// Rotation of the landmark about the objective, away from the object centerline.
    pub lambda: f64,
}

impl LandmarkSpec {
    pub fn new(r: f64, beta: f64, lambda: f64) -> Result<Self> {
        let lm = Self { r, beta, lambda };
        lm.validate()?;
        Ok(lm)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.r.is_finite() && self.r > 0.0) {
            return Err(DockError::invalid("landmark.r", "must be > 0"));
        }
        if !(self.beta.is_finite() && self.lambda.is_finite()) {
            return Err(DockError::invalid("landmark", "angles must be finite"));
        }
        Ok(())
    }

    /// Cross-check against a camera: the landmark must lie farther from the
    /// objective than the camera sits from the wheel axle.
    pub fn validate_with(&self, cam: &CameraSpec) -> Result<()> {
        if self.r <= cam.l {
            return Err(DockError::invalid(
                "landmark.r",
                format!("r = {} must exceed camera.l = {}", self.r, cam.l),
            ));
        }
        Ok(())
    }
}

/// Rectangular object extent; `depth` runs along the centerline, `width` across it.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ObjectSize {
    pub width: f64,
    pub depth: f64,
}

impl ObjectSize {
    pub fn validate(&self) -> Result<()> {
        if !(self.width > 0.0 && self.depth > 0.0) {
            return Err(DockError::invalid("object", "width and depth must be > 0"));
        }
        Ok(())
    }

    pub fn at(self, center: Pose2D) -> ObjectFootprint {
        ObjectFootprint {
            width: self.width,
            depth: self.depth,
            center,
        }
    }
}

/// Object rectangle placed at the objective; `center.theta` is the
/// centerline heading, pointing out of the object's front.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ObjectFootprint {
    pub width: f64,
    pub depth: f64,
    pub center: Pose2D,
}

impl ObjectFootprint {
    /// Corners in the frame `center` is expressed in.
    pub fn corners(&self) -> [Vector2<f64>; 4] {
        let along = self.center.forward() * (self.depth / 2.0);
        let across = self.center.right() * (self.width / 2.0);
        let c = self.center.position();
        [
            c + along + across,
            c + along - across,
            c - along - across,
            c - along + across,
        ]
    }
}

/// Controller state: distance to the landmark, heading error to the
/// landmark line and approach-angle error.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PolarState {
    pub rho: f64,
    pub alpha: f64,
    pub phi: f64,
}

impl PolarState {
    pub fn new(rho: f64, alpha: f64, phi: f64) -> Result<Self> {
        if !(rho.is_finite() && rho >= 0.0) {
            return Err(DockError::Domain(format!("rho = {rho} must be finite and >= 0")));
        }
        Ok(Self {
            rho,
            alpha: normalize_angle(alpha)?,
            phi: normalize_angle(phi)?,
        })
    }
}

/// Landmark and objective poses expressed in one frame.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DockingScene {
    /// Virtual landmark `C`; heading is the goal heading of the robot.
    pub landmark: Pose2D,
    /// Objective `D`; heading is the object centerline.
    pub objective: Pose2D,
}

impl DockingScene {
    /// Builds the scene from the landmark and objective positions.
    pub fn from_points(landmark: Vector2<f64>, objective: Vector2<f64>, lm: &LandmarkSpec) -> Self {
        let to_objective = objective - landmark;
        let cd = to_objective.y.atan2(to_objective.x);
        let dc = (-to_objective.y).atan2(-to_objective.x);
        Self {
            landmark: Pose2D::new(landmark.x, landmark.y, cd - lm.beta),
            objective: Pose2D::new(objective.x, objective.y, dc - lm.lambda),
        }
    }
}

/// Polar state from the landmark `C` and objective `D` given in the robot frame.
pub fn polar_from_local(landmark: Vector2<f64>, objective: Vector2<f64>, lm: &LandmarkSpec) -> Result<PolarState> {
    let rho = landmark.norm();
    if !rho.is_finite() {
        return Err(DockError::Domain("landmark position not finite".into()));
    }
    if rho == 0.0 {
        return Err(DockError::DegenerateState(
            "rho = 0: robot sits on the landmark, alpha undefined".into(),
        ));
    }
    let oc = landmark.y.atan2(landmark.x);
    let cd = objective - landmark;
    let alpha = wrap(oc - FRAC_PI_2);
    let phi = wrap(cd.y.atan2(cd.x) - oc - lm.beta);
    Ok(PolarState { rho, alpha, phi })
}

/// Polar state of a robot relative to a landmark and objective, all in the world frame.
///
/// The landmark heading is not used; `phi` follows from the objective position.
pub fn polar_from_world(
    robot: &Pose2D,
    landmark: &Pose2D,
    objective: &Pose2D,
    _cam: &CameraSpec,
    lm: &LandmarkSpec,
) -> Result<PolarState> {
    polar_from_local(
        robot.to_local(landmark.position()),
        robot.to_local(objective.position()),
        lm,
    )
}

/// Landmark and objective positions in the robot frame for a polar state.
pub fn local_points(state: &PolarState, lm: &LandmarkSpec) -> (Vector2<f64>, Vector2<f64>) {
    let a = state.alpha + FRAC_PI_2;
    let b = state.alpha + state.phi + lm.beta + FRAC_PI_2;
    let c = Vector2::new(state.rho * a.cos(), state.rho * a.sin());
    let d = c + Vector2::new(lm.r * b.cos(), lm.r * b.sin());
    (c, d)
}

/// Objective pose `D` in the robot frame, heading along the object centerline.
pub fn world_from_polar(state: &PolarState, _cam: &CameraSpec, lm: &LandmarkSpec) -> Pose2D {
    scene_from_polar(state, lm).objective
}

/// Full landmark/objective scene in the robot frame.
pub fn scene_from_polar(state: &PolarState, lm: &LandmarkSpec) -> DockingScene {
    let (c, d) = local_points(state, lm);
    DockingScene::from_points(c, d, lm)
}

/// Bearing of the objective seen from the camera, relative to the optical axis.
pub fn bearing_angle(state: &PolarState, cam: &CameraSpec, lm: &LandmarkSpec) -> Result<f64> {
    let s = state.alpha + state.phi + lm.beta;
    let num = -cam.l + state.rho * state.alpha.cos() + lm.r * s.cos();
    let den = -state.rho * state.alpha.sin() - lm.r * s.sin();
    if num == 0.0 && den == 0.0 {
        return Err(DockError::DegenerateGeometry(
            "camera coincides with the objective".into(),
        ));
    }
    Ok(wrap(-FRAC_PI_2 + num.atan2(den)))
}

/// Bearing of an arbitrary robot-frame point relative to the camera axis.
pub fn bearing_of_local_point(point: Vector2<f64>, cam: &CameraSpec) -> Result<f64> {
    let d = point - cam.position();
    if d.x == 0.0 && d.y == 0.0 {
        return Err(DockError::DegenerateGeometry("point coincides with the camera".into()));
    }
    Ok(wrap(d.y.atan2(d.x) - FRAC_PI_2))
}
