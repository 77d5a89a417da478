//! Nonlinear docking feedback law with the field-of-view constraint term,
//! its Lyapunov function, and gain synthesis from the linearization at the goal.

use nalgebra::{Complex, Matrix3};
use serde::{Deserialize, Serialize};

use crate::error::{DockError, Result};
use crate::geometry::{bearing_angle, CameraSpec, LandmarkSpec, PolarState};

type Complex64 = Complex<f64>;

/// Default proportional gain on distance.
pub const DEFAULT_K1: f64 = 0.15;
/// Default gain on the heading error.
pub const DEFAULT_K2: f64 = 0.6;

/// Control gains.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Gains {
    pub k1: f64,
    pub k2: f64,
    pub k3: f64,
}

impl Gains {
    pub fn new(k1: f64, k2: f64, k3: f64) -> Result<Self> {
        let g = Self { k1, k2, k3 };
        g.validate()?;
        Ok(g)
    }

    /// Gains with `k3` synthesized for the given geometry.
    pub fn designed(k1: f64, k2: f64, cam: &CameraSpec, lm: &LandmarkSpec) -> Result<Self> {
        let k3 = design_k3(k1, k2, cam, lm)?;
        Self::new(k1, k2, k3)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.k1 > 0.0 && self.k1.is_finite()) {
            return Err(DockError::invalid("gains.k1", "must be > 0"));
        }
        if !(self.k2 > self.k1 && self.k2.is_finite()) {
            return Err(DockError::invalid("gains.k2", "must exceed k1"));
        }
        if !(self.k3 > 0.0 && self.k3.is_finite()) {
            return Err(DockError::invalid("gains.k3", "must be > 0"));
        }
        Ok(())
    }
}

/// Linear and angular velocity command.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct ControlCommand {
    pub v: f64,
    pub w: f64,
}

/// Distance from the camera to the objective at the goal pose.
pub fn sigma(cam: &CameraSpec, lm: &LandmarkSpec) -> Result<f64> {
    let s = (lm.r.powi(2) * lm.beta.sin().powi(2) + (cam.l - lm.r * lm.beta.cos()).powi(2)).sqrt();
    if s == 0.0 {
        return Err(DockError::DegenerateConfig(
            "sigma = 0: the objective coincides with the camera at the goal".into(),
        ));
    }
    Ok(s)
}

/// `sigma^2 sin^2(alpha_bar) - r^2 sin^2(beta)`; must be positive for a usable configuration.
pub fn fov_margin(cam: &CameraSpec, lm: &LandmarkSpec) -> Result<f64> {
    let s = sigma(cam, lm)?;
    Ok(s * s * cam.alpha_bar.sin().powi(2) - lm.r.powi(2) * lm.beta.sin().powi(2))
}

/// Angular gain that places a double eigenvalue on the heading/approach
/// subsystem of the linearization (critical damping).
pub fn design_k3(k1: f64, k2: f64, cam: &CameraSpec, lm: &LandmarkSpec) -> Result<f64> {
    if !(k1 > 0.0) {
        return Err(DockError::invalid("k1", "must be > 0"));
    }
    if !(k2 > k1) {
        return Err(DockError::invalid("k2", "must exceed k1"));
    }
    let s = sigma(cam, lm)?;
    let margin = fov_margin(cam, lm)?;
    if margin <= 0.0 {
        return Err(DockError::InfeasibleConfig(format!(
            "sigma^2 sin^2(alpha_bar) - r^2 sin^2(beta) = {margin:.3e} <= 0; no k3 keeps the goal inside the field of view"
        )));
    }
    Ok((k1 - k2).powi(2) * s * s / (4.0 * k1 * margin))
}

/// Jacobian of the closed loop in `(rho, alpha, phi)` at the goal, using
/// the small-angle substitution.
pub fn linearized_jacobian(gains: &Gains, cam: &CameraSpec, lm: &LandmarkSpec) -> Result<Matrix3<f64>> {
    let s = sigma(cam, lm)?;
    let coupling = gains.k3 * fov_margin(cam, lm)? / (s * s);
    #[rustfmt::skip]
    let jac = Matrix3::new(
        -gains.k1, 0.0, 0.0,
        0.0, gains.k1 - gains.k2, coupling,
        0.0, -gains.k1, 0.0,
    );
    Ok(jac)
}

/// Discriminant term `b` in its unnormalized form:
/// `sqrt((k1-k2)^2 sigma^2 + 4 k1 k3 (r^2 sin^2 beta - sigma^2 sin^2 alpha_bar))`.
///
/// This equals `sigma` times the discriminant of the Jacobian's characteristic
/// polynomial, so it yields the true eigenvalues only when `sigma = 1` or the
/// discriminant vanishes (the designed `k3`). [`jacobian_eigenvalues`] uses the
/// polynomial's discriminant.
pub fn printed_discriminant(gains: &Gains, cam: &CameraSpec, lm: &LandmarkSpec) -> Result<Complex64> {
    let s = sigma(cam, lm)?;
    let radicand = (gains.k1 - gains.k2).powi(2) * s * s - 4.0 * gains.k1 * gains.k3 * fov_margin(cam, lm)?;
    Ok(Complex64::new(radicand, 0.0).sqrt())
}

/// Closed-form eigenvalues of [`linearized_jacobian`]: `-k1` and
/// `(k1 - k2 +/- b) / 2`.
pub fn jacobian_eigenvalues(gains: &Gains, cam: &CameraSpec, lm: &LandmarkSpec) -> Result<[Complex64; 3]> {
    let s = sigma(cam, lm)?;
    let radicand = (gains.k1 - gains.k2).powi(2) - 4.0 * gains.k1 * gains.k3 * fov_margin(cam, lm)? / (s * s);
    let b = Complex64::new(radicand, 0.0).sqrt();
    let mid = Complex64::new(gains.k1 - gains.k2, 0.0);
    Ok([Complex64::new(-gains.k1, 0.0), (mid + b) / 2.0, (mid - b) / 2.0])
}

/// `v = k1 rho cos(alpha)`, `w = k2 sin(alpha) cos(alpha) - k3 phi (sin^2 alpha_bar - sin^2 alpha*)`.
pub fn control_law(state: &PolarState, gains: &Gains, cam: &CameraSpec, lm: &LandmarkSpec) -> Result<ControlCommand> {
    let alpha_star = bearing_angle(state, cam, lm)?;
    Ok(control_law_with_bearing(state, alpha_star, gains, cam))
}

/// Same law with the bearing supplied by the caller.
pub fn control_law_with_bearing(
    state: &PolarState,
    alpha_star: f64,
    gains: &Gains,
    cam: &CameraSpec,
) -> ControlCommand {
    let (sa, ca) = state.alpha.sin_cos();
    let v = gains.k1 * state.rho * ca;
    let w = gains.k2 * sa * ca - gains.k3 * state.phi * fov_weight(alpha_star, cam);
    ControlCommand { v, w }
}

/// Law without the field-of-view term: `w = k2 sin(alpha) cos(alpha) - k3 phi`.
pub fn unconstrained_law(state: &PolarState, gains: &Gains) -> ControlCommand {
    let (sa, ca) = state.alpha.sin_cos();
    ControlCommand {
        v: gains.k1 * state.rho * ca,
        w: gains.k2 * sa * ca - gains.k3 * state.phi,
    }
}

#[inline]
fn fov_weight(alpha_star: f64, cam: &CameraSpec) -> f64 {
    cam.alpha_bar.sin().powi(2) - alpha_star.sin().powi(2)
}

/// `V = rho^2/2 + sin^2(alpha)/2 + phi^2/2`.
pub fn lyapunov_value(state: &PolarState) -> f64 {
    0.5 * (state.rho * state.rho + state.alpha.sin().powi(2) + state.phi * state.phi)
}

/// Time derivative of [`lyapunov_value`] along the constrained closed loop.
pub fn lyapunov_rate(state: &PolarState, gains: &Gains, cam: &CameraSpec, lm: &LandmarkSpec) -> Result<f64> {
    let alpha_star = bearing_angle(state, cam, lm)?;
    let (sa, ca) = state.alpha.sin_cos();
    let k = gains.k1;
    Ok(-k * state.rho.powi(2) * ca * ca + (k - gains.k2) * sa * sa * ca * ca
        - (k - gains.k3 * fov_weight(alpha_star, cam)) * state.phi * sa * ca)
}

/// Time derivative of [`lyapunov_value`] along the unconstrained closed loop.
pub fn lyapunov_rate_unconstrained(state: &PolarState, gains: &Gains) -> f64 {
    let (sa, ca) = state.alpha.sin_cos();
    -gains.k1 * state.rho.powi(2) * ca * ca
        + (gains.k1 - gains.k2) * sa * sa * ca * ca
        + (gains.k3 - gains.k1) * state.phi * sa * ca
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn case1() -> (CameraSpec, LandmarkSpec) {
        (
            CameraSpec::new(0.26, 40f64.to_radians(), 20f64.to_radians(), 1.0).unwrap(),
            LandmarkSpec::new(0.9, 0.0, 0.0).unwrap(),
        )
    }

    #[test]
    fn sigma_examples() {
        let (cam, lm) = case1();
        assert_abs_diff_eq!(sigma(&cam, &lm).unwrap(), 0.64, epsilon = 1e-12);

        let cam0 = CameraSpec { l: 0.0, ..cam };
        let lm90 = LandmarkSpec {
            r: 1.0,
            beta: std::f64::consts::FRAC_PI_2,
            lambda: 0.0,
        };
        assert_abs_diff_eq!(sigma(&cam0, &lm90).unwrap(), 1.0, epsilon = 1e-12);

        let lm2 = LandmarkSpec {
            r: 0.9,
            beta: -20f64.to_radians(),
            lambda: 340f64.to_radians(),
        };
        let b = -20f64.to_radians();
        let hand = ((0.9 * b.sin()).powi(2) + (0.26 - 0.9 * b.cos()).powi(2)).sqrt();
        assert_abs_diff_eq!(sigma(&cam, &lm2).unwrap(), hand, epsilon = 1e-12);

        let on_camera = LandmarkSpec {
            r: 0.26,
            beta: 0.0,
            lambda: 0.0,
        };
        assert!(matches!(sigma(&cam, &on_camera), Err(DockError::DegenerateConfig(_))));
    }

    #[test]
    fn design_k3_case1() {
        let (cam, lm) = case1();
        let k3 = design_k3(0.15, 0.6, &cam, &lm).unwrap();
        // 0.45^2 * 0.64^2 / (4 * 0.15 * 0.64^2 * sin^2(40 deg))
        let hand = 0.2025 / (0.6 * 40f64.to_radians().sin().powi(2));
        assert_abs_diff_eq!(k3, hand, epsilon = 1e-12);
        assert_abs_diff_eq!(k3, 0.8168, epsilon = 1e-4);
    }

    #[test]
    fn design_k3_rejects_zero_margin() {
        let (cam, _) = case1();
        // choose beta with r^2 sin^2(beta) = sigma^2 sin^2(alpha_bar): with l = 0, sigma = r,
        // so beta = alpha_bar
        let cam0 = CameraSpec { l: 0.0, ..cam };
        let lm = LandmarkSpec {
            r: 0.9,
            beta: cam.alpha_bar,
            lambda: 0.0,
        };
        assert!(matches!(
            design_k3(0.15, 0.6, &cam0, &lm),
            Err(DockError::InfeasibleConfig(_))
        ));
        let lm_wide = LandmarkSpec {
            beta: cam.alpha_bar + 0.1,
            ..lm
        };
        assert!(design_k3(0.15, 0.6, &cam0, &lm_wide).is_err());
        assert!(design_k3(0.6, 0.15, &cam0, &LandmarkSpec { beta: 0.0, ..lm }).is_err());
    }

    #[test]
    fn designed_gains_are_critically_damped() {
        let (cam, lm) = case1();
        let gains = Gains::designed(0.15, 0.6, &cam, &lm).unwrap();
        assert!(printed_discriminant(&gains, &cam, &lm).unwrap().norm() < 1e-9);
        let eig = jacobian_eigenvalues(&gains, &cam, &lm).unwrap();
        assert!(eig.iter().all(|e| e.re < 0.0));
        // double root: the square root amplifies rounding in the radicand
        assert_abs_diff_eq!(eig[1].re, eig[2].re, epsilon = 1e-7);
    }

    #[test]
    fn reversed_gains_are_unstable() {
        let (cam, lm) = case1();
        let gains = Gains {
            k1: 0.6,
            k2: 0.15,
            k3: 0.5,
        };
        let eig = jacobian_eigenvalues(&gains, &cam, &lm).unwrap();
        assert!(eig.iter().any(|e| e.re > 0.0));
    }

    #[test]
    fn control_law_examples() {
        let (cam, lm) = case1();
        let gains = Gains::designed(0.15, 0.6, &cam, &lm).unwrap();

        let at_rest = PolarState::new(0.0, 0.3, 0.1).unwrap();
        assert_eq!(control_law(&at_rest, &gains, &cam, &lm).unwrap().v, 0.0);

        let sideways = PolarState::new(1.0, std::f64::consts::FRAC_PI_2, 0.0).unwrap();
        let cmd = control_law(&sideways, &gains, &cam, &lm).unwrap();
        assert_abs_diff_eq!(cmd.v, 0.0, epsilon = 1e-15);
        assert_abs_diff_eq!(cmd.w, 0.0, epsilon = 1e-15);
    }

    #[test]
    fn control_law_matches_hand_evaluation() {
        let (cam, lm) = case1();
        let gains = Gains::designed(0.15, 0.6, &cam, &lm).unwrap();
        let (rho, alpha, phi) = (1.0f64, 0.2f64, -0.1f64);
        let s = PolarState::new(rho, alpha, phi).unwrap();
        let cmd = control_law(&s, &gains, &cam, &lm).unwrap();

        // objective seen from the camera, built from points
        let dx = -rho * alpha.sin() - 0.9 * (alpha + phi).sin();
        let dy = rho * alpha.cos() + 0.9 * (alpha + phi).cos() - 0.26;
        let alpha_star = dy.atan2(dx) - std::f64::consts::FRAC_PI_2;
        let v = 0.15 * rho * alpha.cos();
        let w = 0.6 * alpha.sin() * alpha.cos()
            - gains.k3 * phi * (40f64.to_radians().sin().powi(2) - alpha_star.sin().powi(2));
        assert_abs_diff_eq!(cmd.v, v, epsilon = 1e-12);
        assert_abs_diff_eq!(cmd.w, w, epsilon = 1e-12);
    }

    #[test]
    fn lyapunov_origin_and_phi_zero() {
        let (cam, lm) = case1();
        let gains = Gains::designed(0.15, 0.6, &cam, &lm).unwrap();
        let origin = PolarState::new(0.0, 0.0, 0.0).unwrap();
        assert_eq!(lyapunov_value(&origin), 0.0);
        assert_eq!(lyapunov_rate(&origin, &gains, &cam, &lm).unwrap(), 0.0);

        for &(rho, alpha) in &[(1.0, 0.3), (0.2, -1.0), (1.9, 1.0), (0.5, 0.0)] {
            let s = PolarState::new(rho, alpha, 0.0).unwrap();
            let rate = lyapunov_rate(&s, &gains, &cam, &lm).unwrap();
            let expected = -0.15 * rho * rho * f64::cos(alpha).powi(2)
                + (0.15 - 0.6) * (f64::sin(alpha) * f64::cos(alpha)).powi(2);
            assert_abs_diff_eq!(rate, expected, epsilon = 1e-15);
            assert!(rate <= 0.0);
        }
    }
}
