use nalgebra::{Point3, Rotation2, Vector2};
use serde::{Deserialize, Serialize};

use super::{LandmarkEstimate, PointCloud};
use crate::error::{DockError, Result};
use crate::geometry::{CameraSpec, DockingScene, LandmarkSpec};

/// Rigid planar map from camera horizontal coordinates to the robot frame.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PlanarTransform {
    pub translation: [f64; 2],
    pub rotation: f64,
}

impl PlanarTransform {
    /// Camera horizontal coordinates `(lateral, forward)` to `S_o`: the
    /// camera sits at `(0, l)` looking along +y.
    pub fn camera_to_robot(cam: &CameraSpec) -> Self {
        Self {
            translation: [0.0, cam.l],
            rotation: 0.0,
        }
    }

    pub fn apply(&self, p: Vector2<f64>) -> Vector2<f64> {
        Rotation2::new(self.rotation) * p + Vector2::from(self.translation)
    }
}

/// Height above the floor of a camera-frame point.
pub fn point_height(p: &Point3<f64>, cam: &CameraSpec) -> f64 {
    let (s, c) = cam.gamma.sin_cos();
    cam.z_a - p.y * c - p.z * s
}

/// Orthogonal projection onto the horizontal plane through the camera,
/// `y + z tan(gamma) = 0`.
pub fn project_to_horizontal(p: &Point3<f64>, gamma: f64) -> Point3<f64> {
    let t = gamma.tan();
    let k = (p.y + p.z * t) / (1.0 + t * t);
    Point3::new(p.x, p.y - k, p.z - t * k)
}

/// `(lateral, forward)` coordinates of a point on the horizontal plane.
pub fn horizontal_coordinates(p: &Point3<f64>, gamma: f64) -> Vector2<f64> {
    let (s, c) = gamma.sin_cos();
    Vector2::new(p.x, -p.y * s + p.z * c)
}

/// Splits an object cloud into bottom (height at or below the threshold) and back.
pub fn split_bottom_back(
    object: &PointCloud,
    height_threshold: f64,
    cam: &CameraSpec,
) -> Result<(PointCloud, PointCloud)> {
    if object.is_empty() {
        return Err(DockError::NotAChair("object cloud is empty".into()));
    }
    let (bottom, back): (Vec<_>, Vec<_>) = object
        .points
        .iter()
        .partition(|p| point_height(p, cam) <= height_threshold);
    if bottom.is_empty() {
        return Err(DockError::NotAChair(format!(
            "no points at or below {height_threshold} m"
        )));
    }
    if back.is_empty() {
        return Err(DockError::NotAChair(format!("no points above {height_threshold} m")));
    }
    Ok((PointCloud::new(bottom), PointCloud::new(back)))
}

/// Objective at the bottom centroid and virtual landmark at distance `r`
/// along the back-to-bottom direction, rotated by `lambda` about the objective.
pub fn estimate_landmark(
    bottom: &PointCloud,
    back: &PointCloud,
    cam: &CameraSpec,
    lm: &LandmarkSpec,
    cam_to_robot: &PlanarTransform,
) -> Result<LandmarkEstimate> {
    let to_robot = |cloud: &PointCloud, what: &str| -> Result<Vector2<f64>> {
        let c = cloud
            .centroid()
            .ok_or_else(|| DockError::NotAChair(format!("{what} cloud is empty")))?;
        let projected = project_to_horizontal(&c, cam.gamma);
        Ok(cam_to_robot.apply(horizontal_coordinates(&projected, cam.gamma)))
    };
    let objective = to_robot(bottom, "bottom")?;
    let back_center = to_robot(back, "back")?;

    let offset = objective - back_center;
    let d_mk = offset.norm();
    if !(d_mk > 1e-6) {
        return Err(DockError::DegenerateGeometry(format!(
            "bottom and back centroids are {d_mk:.3e} m apart"
        )));
    }
    let straight = objective + offset * (lm.r / d_mk);
    let landmark = Rotation2::new(lm.lambda) * (straight - objective) + objective;

    let scene = DockingScene::from_points(landmark, objective, lm);
    Ok(LandmarkEstimate {
        objective_xy: [objective.x, objective.y],
        landmark_xy: [landmark.x, landmark.y],
        landmark_heading: scene.landmark.theta,
    })
}
