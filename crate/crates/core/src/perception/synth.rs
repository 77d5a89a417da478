//! Synthetic chair clouds standing in for a depth camera.
//!
//! The chair is a horizontal seat, a vertical back panel along the rear
//! edge, and two thin rear posts joining them. Surfaces are sampled on a
//! jittered grid, moved into the camera frame, cropped to the horizontal
//! field of view and perturbed with Gaussian noise.

use nalgebra::{Point3, Vector2};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use super::PointCloud;
use crate::error::{DockError, Result};
use crate::geometry::{CameraSpec, ObjectFootprint, Pose2D};

/// Heights of the chair surfaces above the floor, meters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ChairGeometry {
    pub seat_height: f64,
    /// Lower edge of the back panel.
    pub back_bottom: f64,
    pub back_top: f64,
    /// Width of the rear posts; zero drops them.
    pub post_width: f64,
}

impl Default for ChairGeometry {
    fn default() -> Self {
        Self {
            seat_height: 0.45,
            back_bottom: 0.6,
            back_top: 0.9,
            post_width: 0.02,
        }
    }
}

impl ChairGeometry {
    pub fn validate(&self) -> Result<()> {
        if !(self.seat_height > 0.0 && self.back_bottom >= self.seat_height && self.back_top > self.back_bottom) {
            return Err(DockError::invalid(
                "chair",
                "need 0 < seat_height <= back_bottom < back_top",
            ));
        }
        if !(self.post_width >= 0.0) {
            return Err(DockError::invalid("chair.post_width", "must be >= 0"));
        }
        Ok(())
    }
}

/// Sampling density, sensor noise and RNG seed.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct CloudSampling {
    /// Points per square meter of surface.
    pub density: f64,
    pub noise_sigma: f64,
    pub seed: u64,
}

impl Default for CloudSampling {
    fn default() -> Self {
        Self {
            density: 10_000.0,
            noise_sigma: 0.0,
            seed: 0,
        }
    }
}

/// Ground-truth surface a synthetic point was sampled from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum PartLabel {
    Seat,
    Back,
    Post,
}

/// World-frame 3-D point: planar position and height.
type WorldPoint = (Vector2<f64>, f64);

struct Surface {
    origin: WorldPoint,
    /// Horizontal edge (planar direction * length).
    u: Vector2<f64>,
    /// Vertical extent; zero for the horizontal seat.
    height: f64,
    /// Second horizontal edge for the seat.
    v: Vector2<f64>,
    label: PartLabel,
}

impl Surface {
    fn extents(&self) -> (f64, f64) {
        let second = if self.height > 0.0 { self.height } else { self.v.norm() };
        (self.u.norm(), second)
    }

    fn at(&self, a: f64, b: f64) -> WorldPoint {
        if self.height > 0.0 {
            (self.origin.0 + self.u * a, self.origin.1 + self.height * b)
        } else {
            (self.origin.0 + self.u * a + self.v * b, self.origin.1)
        }
    }
}

fn surfaces(chair: &ObjectFootprint, geom: &ChairGeometry) -> Vec<Surface> {
    let along = chair.center.forward();
    let across = chair.center.right();
    let center = chair.center.position();
    let rear = center - along * (chair.depth / 2.0);

    let mut out = vec![
        Surface {
            origin: (
                center - along * (chair.depth / 2.0) - across * (chair.width / 2.0),
                geom.seat_height,
            ),
            u: across * chair.width,
            v: along * chair.depth,
            height: 0.0,
            label: PartLabel::Seat,
        },
        Surface {
            origin: (rear - across * (chair.width / 2.0), geom.back_bottom),
            u: across * chair.width,
            v: Vector2::zeros(),
            height: geom.back_top - geom.back_bottom,
            label: PartLabel::Back,
        },
    ];
    let post_height = geom.back_bottom - geom.seat_height;
    if geom.post_width > 0.0 && post_height > 0.0 {
        for side in [-1.0, 1.0] {
            let inner = rear + across * (side * (chair.width / 2.0 - geom.post_width / 2.0));
            out.push(Surface {
                origin: (inner - across * (geom.post_width / 2.0), geom.seat_height),
                u: across * geom.post_width,
                v: Vector2::zeros(),
                height: post_height,
                label: PartLabel::Post,
            });
        }
    }
    out
}

/// World point to camera optical frame.
fn to_camera(p: WorldPoint, robot: &Pose2D, cam: &CameraSpec) -> Point3<f64> {
    let local = robot.to_local(p.0);
    let forward = local.y - cam.l;
    let up = p.1 - cam.z_a;
    let (s, c) = cam.gamma.sin_cos();
    Point3::new(local.x, -forward * s - up * c, forward * c - up * s)
}

/// Sampled chair cloud in the camera frame, with the surface label of every point.
pub fn synth_chair_labeled(
    chair: &ObjectFootprint,
    geom: &ChairGeometry,
    robot: &Pose2D,
    cam: &CameraSpec,
    sampling: &CloudSampling,
) -> Result<(PointCloud, Vec<PartLabel>)> {
    geom.validate()?;
    if !(sampling.density > 0.0 && sampling.noise_sigma >= 0.0) {
        return Err(DockError::invalid(
            "sampling",
            "density must be > 0 and noise_sigma >= 0",
        ));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(sampling.seed);
    let noise = Normal::new(0.0, sampling.noise_sigma).map_err(|e| DockError::invalid("noise_sigma", e.to_string()))?;
    let spacing = sampling.density.sqrt().recip();

    let mut points = Vec::new();
    let mut labels = Vec::new();
    for surface in surfaces(chair, geom) {
        let (len_a, len_b) = surface.extents();
        let na = (len_a / spacing).ceil().max(1.0) as usize;
        let nb = (len_b / spacing).ceil().max(1.0) as usize;
        for i in 0..na {
            for j in 0..nb {
                let a = (i as f64 + rng.random::<f64>()) / na as f64;
                let b = (j as f64 + rng.random::<f64>()) / nb as f64;
                let mut p = to_camera(surface.at(a, b), robot, cam);
                if !(p.z > 0.0 && in_hfov(&p, cam)) {
                    continue;
                }
                if sampling.noise_sigma > 0.0 {
                    p += nalgebra::Vector3::new(noise.sample(&mut rng), noise.sample(&mut rng), noise.sample(&mut rng));
                }
                points.push(p);
                labels.push(surface.label);
            }
        }
    }
    Ok((PointCloud::new(points), labels))
}

/// Sampled chair cloud in the camera frame.
pub fn synth_chair_cloud(
    chair: &ObjectFootprint,
    geom: &ChairGeometry,
    robot: &Pose2D,
    cam: &CameraSpec,
    sampling: &CloudSampling,
) -> Result<PointCloud> {
    synth_chair_labeled(chair, geom, robot, cam, sampling).map(|(cloud, _)| cloud)
}

fn in_hfov(p: &Point3<f64>, cam: &CameraSpec) -> bool {
    let forward = super::horizontal_coordinates(p, cam.gamma).y;
    forward > 0.0 && p.x.atan2(forward).abs() <= cam.alpha_bar
}
