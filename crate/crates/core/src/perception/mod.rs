//! Virtual landmark estimation from a depth point cloud of a chair-like object.
//!
//! Pipeline: pass-through crop, voxel downsampling, Euclidean clustering,
//! closest-cluster selection, height split into bottom and back, horizontal
//! projection of both centroids, and landmark generation at offset
//! `(r, lambda)` from the bottom centroid.
//!
//! Camera frame `S_a` follows the usual depth-camera optical convention:
//! x to the right, y down, z along the optical axis. The camera is pitched
//! down by `gamma` and mounted `z_a` above the floor.

mod cluster;
mod filters;
pub mod io;
mod landmark;
mod synth;

use nalgebra::{Point3, Vector2};
use serde::{Deserialize, Serialize};

use crate::error::{DockError, Result};
use crate::geometry::{CameraSpec, LandmarkSpec};

pub use cluster::{euclidean_clusters, select_object};
pub use filters::{passthrough_filter, voxel_downsample};
pub use landmark::{
    estimate_landmark, horizontal_coordinates, point_height, project_to_horizontal, split_bottom_back, PlanarTransform,
};
pub use synth::{synth_chair_cloud, synth_chair_labeled, ChairGeometry, CloudSampling, PartLabel};

/// Unordered 3-D points in the camera frame, meters.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct PointCloud {
    pub points: Vec<Point3<f64>>,
}

impl PointCloud {
    pub fn new(points: Vec<Point3<f64>>) -> Self {
        Self { points }
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// Mean of all points, `None` for an empty cloud.
    pub fn centroid(&self) -> Option<Point3<f64>> {
        if self.points.is_empty() {
            return None;
        }
        let sum = self
            .points
            .iter()
            .fold(nalgebra::Vector3::zeros(), |acc, p| acc + p.coords);
        Some(Point3::from(sum / self.points.len() as f64))
    }

    pub fn validate(&self) -> Result<()> {
        if let Some(i) = self
            .points
            .iter()
            .position(|p| !(p.x.is_finite() && p.y.is_finite() && p.z.is_finite()))
        {
            return Err(DockError::Domain(format!("point {i} has a non-finite coordinate")));
        }
        Ok(())
    }
}

impl FromIterator<Point3<f64>> for PointCloud {
    fn from_iter<I: IntoIterator<Item = Point3<f64>>>(iter: I) -> Self {
        Self::new(iter.into_iter().collect())
    }
}

/// Closed axis-aligned box in the camera frame.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Aabb {
    pub min: [f64; 3],
    pub max: [f64; 3],
}

impl Aabb {
    pub fn contains(&self, p: &Point3<f64>) -> bool {
        (0..3).all(|i| p[i] >= self.min[i] && p[i] <= self.max[i])
    }
}

/// Filter and segmentation parameters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PerceptionParams {
    pub passthrough_box: Aabb,
    pub voxel_size: f64,
    pub cluster_tolerance: f64,
    pub cluster_min_points: usize,
    pub cluster_max_points: usize,
    /// Points at or below this height above the floor belong to the bottom.
    pub height_threshold: f64,
}

impl Default for PerceptionParams {
    fn default() -> Self {
        Self {
            passthrough_box: Aabb {
                min: [-2.0, -2.0, 0.2],
                max: [2.0, 2.0, 4.0],
            },
            voxel_size: 0.02,
            cluster_tolerance: 0.05,
            cluster_min_points: 50,
            cluster_max_points: 50_000,
            height_threshold: 0.55,
        }
    }
}

impl PerceptionParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.voxel_size > 0.0) {
            return Err(DockError::invalid("perception.voxel_size", "must be > 0"));
        }
        if !(self.cluster_tolerance > 0.0) {
            return Err(DockError::invalid("perception.cluster_tolerance", "must be > 0"));
        }
        if self.cluster_min_points == 0 || self.cluster_min_points > self.cluster_max_points {
            return Err(DockError::invalid(
                "perception.cluster_min_points",
                "need 0 < min <= max",
            ));
        }
        if (0..3).any(|i| self.passthrough_box.min[i] > self.passthrough_box.max[i]) {
            return Err(DockError::invalid("perception.passthrough_box", "min exceeds max"));
        }
        Ok(())
    }
}

/// Objective and virtual landmark in the robot frame `S_o`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LandmarkEstimate {
    pub objective_xy: [f64; 2],
    pub landmark_xy: [f64; 2],
    /// Goal heading at the landmark, as a robot-frame angle from +x.
    pub landmark_heading: f64,
}

impl LandmarkEstimate {
    pub fn objective(&self) -> Vector2<f64> {
        Vector2::from(self.objective_xy)
    }

    pub fn landmark(&self) -> Vector2<f64> {
        Vector2::from(self.landmark_xy)
    }
}

/// Runs the full pipeline on a raw camera-frame cloud.
pub fn perceive(
    cloud: &PointCloud,
    params: &PerceptionParams,
    cam: &CameraSpec,
    lm: &LandmarkSpec,
) -> Result<LandmarkEstimate> {
    params.validate()?;
    let cropped = passthrough_filter(cloud, params);
    let sparse = voxel_downsample(&cropped, params.voxel_size)?;
    let clusters = euclidean_clusters(&sparse, params)?;
    let object = select_object(&clusters)?;
    let (bottom, back) = split_bottom_back(object, params.height_threshold, cam)?;
    estimate_landmark(&bottom, &back, cam, lm, &PlanarTransform::camera_to_robot(cam))
}
