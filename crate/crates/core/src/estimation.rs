//! Extended Kalman filter over the objective and virtual landmark positions
//! in the robot frame, driven by odometry and corrected by landmark
//! measurements, with a latched switch to odometry-only propagation near the goal.

use nalgebra::{Matrix2, Matrix4, Matrix4x3, Vector2, Vector4};
use serde::{Deserialize, Serialize};

use crate::error::{DockError, Result};
use crate::perception::LandmarkEstimate;

/// Whether landmark measurements are still being fused.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Phase {
    Fusing,
    OdometryOnly,
}

/// Incremental robot motion over one step, expressed in the robot frame at
/// the start of the step.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct OdometryDelta {
    pub dx: f64,
    pub dy: f64,
    pub dtheta: f64,
}

/// Filter tuning and simulated sensor noise.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EstimationParams {
    /// Switch to odometry-only once the estimated distance to the landmark drops below this.
    pub gate_threshold: f64,
    /// Per-axis standard deviation of landmark measurements, meters.
    pub measurement_sigma: f64,
    /// Odometry noise as a fraction of the motion per step.
    pub odometry_noise_frac: f64,
    /// Steps between landmark measurements.
    pub measurement_period: usize,
    /// Initial per-axis standard deviation of the state.
    pub initial_sigma: f64,
}

impl Default for EstimationParams {
    fn default() -> Self {
        Self {
            gate_threshold: 0.8,
            measurement_sigma: 0.03,
            odometry_noise_frac: 0.01,
            measurement_period: 10,
            initial_sigma: 0.05,
        }
    }
}

impl EstimationParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.gate_threshold >= 0.0) {
            return Err(DockError::invalid("estimation.gate_threshold", "must be >= 0"));
        }
        if !(self.measurement_sigma >= 0.0 && self.odometry_noise_frac >= 0.0 && self.initial_sigma > 0.0) {
            return Err(DockError::invalid(
                "estimation",
                "noise levels must be >= 0 and initial_sigma > 0",
            ));
        }
        if self.measurement_period == 0 {
            return Err(DockError::invalid("estimation.measurement_period", "must be >= 1"));
        }
        Ok(())
    }

    /// Measurement covariance assumed by the filter; floored at 1 mm.
    pub fn measurement_covariance(&self) -> Matrix4<f64> {
        Matrix4::from_diagonal_element(self.measurement_sigma.max(1e-3).powi(2))
    }
}

/// Mean `(x_D, y_D, x_C, y_C)` in the robot frame with its covariance.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EstimatorState {
    pub mean: Vector4<f64>,
    pub covariance: Matrix4<f64>,
    pub phase: Phase,
}

impl EstimatorState {
    /// Filter initialized from a first measurement.
    pub fn from_measurement(m: &LandmarkEstimate, initial_sigma: f64) -> Self {
        Self {
            mean: measurement_vector(m),
            covariance: Matrix4::from_diagonal_element(initial_sigma * initial_sigma),
            phase: Phase::Fusing,
        }
    }

    pub fn objective(&self) -> Vector2<f64> {
        Vector2::new(self.mean[0], self.mean[1])
    }

    pub fn landmark(&self) -> Vector2<f64> {
        Vector2::new(self.mean[2], self.mean[3])
    }

    /// Smallest eigenvalue of the covariance.
    pub fn min_covariance_eigenvalue(&self) -> f64 {
        self.covariance.symmetric_eigenvalues().min()
    }

    /// Motion model: both points are fixed in the world, so they move by the
    /// inverse of the robot's incremental motion.
    pub fn predict(&self, odo: &OdometryDelta, process_noise: &Matrix4<f64>) -> EstimatorState {
        let r = inverse_rotation(odo.dtheta);
        let shift = Vector2::new(odo.dx, odo.dy);
        let d = r * (self.objective() - shift);
        let c = r * (self.landmark() - shift);
        let f = block_diag(&r);
        EstimatorState {
            mean: Vector4::new(d.x, d.y, c.x, c.y),
            covariance: symmetrize(f * self.covariance * f.transpose() + process_noise),
            phase: self.phase,
        }
    }

    /// Kalman correction with direct observation of all four coordinates.
    pub fn update(&self, m: &LandmarkEstimate, measurement_noise: &Matrix4<f64>) -> Result<EstimatorState> {
        if self.phase != Phase::Fusing {
            return Err(DockError::Phase(
                "landmark update rejected: estimator is in odometry-only phase".into(),
            ));
        }
        let innovation = measurement_vector(m) - self.mean;
        let s = self.covariance + measurement_noise;
        let s_inv = s
            .try_inverse()
            .ok_or_else(|| DockError::Domain("innovation covariance is singular".into()))?;
        let gain = self.covariance * s_inv;
        let ikh = Matrix4::identity() - gain;
        // Joseph form keeps the covariance symmetric positive-definite
        let cov = ikh * self.covariance * ikh.transpose() + gain * measurement_noise * gain.transpose();
        Ok(EstimatorState {
            mean: self.mean + gain * innovation,
            covariance: symmetrize(cov),
            phase: self.phase,
        })
    }

    /// Latches odometry-only mode once the estimated landmark distance falls below `threshold`.
    pub fn two_phase_gate(&self, rho_hat: f64, threshold: f64) -> EstimatorState {
        let mut next = *self;
        if rho_hat < threshold {
            next.phase = Phase::OdometryOnly;
        }
        next
    }
}

/// Process noise from odometry errors proportional to the motion, mapped
/// through the motion model's Jacobian with respect to the odometry.
pub fn odometry_process_noise(state: &EstimatorState, odo: &OdometryDelta, frac: f64) -> Matrix4<f64> {
    // keep a tiny floor so the covariance never collapses while stationary
    const FLOOR: f64 = 1e-9;
    let var = |x: f64| (frac * x.abs()).powi(2) + FLOOR * FLOOR;
    let sigma_odo =
        nalgebra::Matrix3::from_diagonal(&nalgebra::Vector3::new(var(odo.dx), var(odo.dy), var(odo.dtheta)));
    let g = odometry_jacobian(state, odo);
    symmetrize(g * sigma_odo * g.transpose())
}

fn odometry_jacobian(state: &EstimatorState, odo: &OdometryDelta) -> Matrix4x3<f64> {
    let r = inverse_rotation(odo.dtheta);
    let (s, c) = odo.dtheta.sin_cos();
    // derivative of R(-a) with respect to a
    let dr = Matrix2::new(-s, c, -c, -s);
    let shift = Vector2::new(odo.dx, odo.dy);
    let mut g = Matrix4x3::zeros();
    for (row, p) in [(0, state.objective()), (2, state.landmark())] {
        g.fixed_view_mut::<2, 2>(row, 0).copy_from(&(-r));
        g.fixed_view_mut::<2, 1>(row, 2).copy_from(&(dr * (p - shift)));
    }
    g
}

fn inverse_rotation(angle: f64) -> Matrix2<f64> {
    let (s, c) = angle.sin_cos();
    Matrix2::new(c, s, -s, c)
}

fn block_diag(r: &Matrix2<f64>) -> Matrix4<f64> {
    let mut f = Matrix4::zeros();
    f.fixed_view_mut::<2, 2>(0, 0).copy_from(r);
    f.fixed_view_mut::<2, 2>(2, 2).copy_from(r);
    f
}

fn symmetrize(m: Matrix4<f64>) -> Matrix4<f64> {
    (m + m.transpose()) * 0.5
}

fn measurement_vector(m: &LandmarkEstimate) -> Vector4<f64> {
    Vector4::new(m.objective_xy[0], m.objective_xy[1], m.landmark_xy[0], m.landmark_xy[1])
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use nalgebra::Rotation2;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use rand_distr::{Distribution, Normal, Uniform};

    fn measurement(d: [f64; 2], c: [f64; 2]) -> LandmarkEstimate {
        LandmarkEstimate {
            objective_xy: d,
            landmark_xy: c,
            landmark_heading: 0.0,
        }
    }

    fn prior() -> EstimatorState {
        EstimatorState::from_measurement(&measurement([0.2, 2.5], [0.1, 1.6]), 0.05)
    }

    #[test]
    fn zero_motion_is_identity() {
        let s = prior();
        let next = s.predict(&OdometryDelta::default(), &Matrix4::zeros());
        assert_eq!(next.mean, s.mean);
        assert_abs_diff_eq!(next.covariance, s.covariance, epsilon = 1e-18);
    }

    #[test]
    fn pure_translation_shifts_means() {
        let s = prior();
        let odo = OdometryDelta {
            dx: 0.1,
            dy: 0.3,
            dtheta: 0.0,
        };
        let next = s.predict(&odo, &Matrix4::zeros());
        assert_abs_diff_eq!(next.mean, s.mean - Vector4::new(0.1, 0.3, 0.1, 0.3), epsilon = 1e-15);
        assert_abs_diff_eq!(next.covariance, s.covariance, epsilon = 1e-18);
    }

    #[test]
    fn random_walk_tracks_rigid_transform() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let step = Uniform::new(-0.05, 0.05).unwrap();
        let d_world = Vector2::new(0.3, 2.4);
        let c_world = Vector2::new(-0.2, 1.5);
        // robot pose in the world as (position, heading) with local = R(-heading) (p - position)
        let mut pos = Vector2::zeros();
        let mut heading = 0.0f64;
        let mut s =
            EstimatorState::from_measurement(&measurement([d_world.x, d_world.y], [c_world.x, c_world.y]), 0.05);
        for _ in 0..100 {
            let odo = OdometryDelta {
                dx: step.sample(&mut rng),
                dy: step.sample(&mut rng),
                dtheta: step.sample(&mut rng),
            };
            pos += Rotation2::new(heading) * Vector2::new(odo.dx, odo.dy);
            heading += odo.dtheta;
            s = s.predict(&odo, &Matrix4::zeros());
        }
        let to_local = |p: Vector2<f64>| Rotation2::new(-heading) * (p - pos);
        assert_abs_diff_eq!((s.objective() - to_local(d_world)).norm(), 0.0, epsilon = 1e-9);
        assert_abs_diff_eq!((s.landmark() - to_local(c_world)).norm(), 0.0, epsilon = 1e-9);
        assert!(s.min_covariance_eigenvalue() > 0.0);
    }

    #[test]
    fn update_with_prior_mean_shrinks_covariance() {
        let s = prior();
        let m = measurement([s.mean[0], s.mean[1]], [s.mean[2], s.mean[3]]);
        let next = s.update(&m, &Matrix4::from_diagonal_element(0.03f64.powi(2))).unwrap();
        assert_abs_diff_eq!(next.mean, s.mean, epsilon = 1e-15);
        assert!(next.covariance.trace() < s.covariance.trace());
        assert!(next.min_covariance_eigenvalue() > 0.0);
    }

    #[test]
    fn uninformative_measurement_barely_moves_mean() {
        let s = prior();
        let m = measurement([1.0, 1.0], [1.0, 1.0]);
        let rm = Matrix4::from_diagonal_element(0.03f64.powi(2) * 1e9);
        let next = s.update(&m, &rm).unwrap();
        assert!((next.mean - s.mean).norm() < 1e-6);
    }

    #[test]
    fn stationary_monte_carlo_consistency() {
        let truth = Vector4::new(0.2, 2.5, 0.1, 1.6);
        let sigma = 0.05;
        let rm = Matrix4::from_diagonal_element(sigma * sigma);
        let noise = Normal::new(0.0, sigma).unwrap();
        let mut finals = Vec::new();
        let mut last_cov = Matrix4::zeros();
        for seed in 0..200u64 {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let mut draw = || {
                measurement(
                    [truth[0] + noise.sample(&mut rng), truth[1] + noise.sample(&mut rng)],
                    [truth[2] + noise.sample(&mut rng), truth[3] + noise.sample(&mut rng)],
                )
            };
            let mut s = EstimatorState::from_measurement(&draw(), sigma);
            for _ in 1..200 {
                s = s.update(&draw(), &rm).unwrap();
            }
            finals.push(s.mean - truth);
            last_cov = s.covariance;
        }
        let n = finals.len() as f64;
        let rms = (finals.iter().map(|e| e.norm_squared()).sum::<f64>() / (4.0 * n)).sqrt();
        assert!(rms < 0.01, "rms error {rms}");
        let empirical = finals.iter().map(|e| e[0] * e[0]).sum::<f64>() / n;
        let ratio = empirical / last_cov[(0, 0)];
        assert!((0.5..2.0).contains(&ratio), "variance ratio {ratio}");
    }

    #[test]
    fn gate_latches() {
        let s = prior();
        assert_eq!(s.two_phase_gate(1.2, 0.8).phase, Phase::Fusing);
        let gated = s.two_phase_gate(0.5, 0.8);
        assert_eq!(gated.phase, Phase::OdometryOnly);
        assert_eq!(gated.two_phase_gate(5.0, 0.8).phase, Phase::OdometryOnly);
        let m = measurement([0.0, 1.0], [0.0, 0.5]);
        assert!(matches!(
            gated.update(&m, &Matrix4::identity()),
            Err(DockError::Phase(_))
        ));
    }

    #[test]
    fn process_noise_is_psd() {
        let s = prior();
        let q = odometry_process_noise(
            &s,
            &OdometryDelta {
                dx: 0.01,
                dy: 0.02,
                dtheta: 0.05,
            },
            0.01,
        );
        assert!(q.symmetric_eigenvalues().min() >= -1e-18);
        assert_abs_diff_eq!(q, q.transpose(), epsilon = 1e-18);
    }
}
