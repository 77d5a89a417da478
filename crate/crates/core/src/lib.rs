//! Docking a differential-drive robot to a virtual landmark while keeping the
//! reference object inside the camera's horizontal field of view.
//!
//! Modules, bottom up:
//!
//! * [`geometry`]: frames, poses and the polar docking state.
//! * [`perception`]: point-cloud pipeline producing the landmark estimate.
//! * [`controller`]: feedback law, Lyapunov function and gain design.
//! * [`simulator`]: closed-loop episodes with wheel dead-zone and FOV monitoring.
//! * [`feasible`]: grid sweeps, boundary fitting and Lyapunov verification.
//! * [`estimation`]: EKF over the landmark and objective positions.
//! * [`config`] and [`export`]: configuration files and result artifacts.

#![allow(clippy::neg_cmp_op_on_partial_ord)] // negated comparisons also reject NaN

pub mod config;
pub mod controller;
pub mod error;
pub mod estimation;
pub mod export;
pub mod feasible;
pub mod geometry;
pub mod perception;
pub mod simulator;

pub use config::{load_config, DockingConfig, GainsConfig, IntegrationParams};
pub use controller::{
    control_law, design_k3, jacobian_eigenvalues, lyapunov_rate, lyapunov_value, sigma, ControlCommand, Gains,
};
pub use error::{DockError, Result};
pub use estimation::{EstimationParams, EstimatorState, OdometryDelta, Phase};
pub use feasible::{
    fit_boundary, in_fitted_region, sweep, verify_lyapunov, AxisRange, BoundaryFit, FeasibilityLabel, FitSettings,
    LyapunovReport, StateGrid,
};
pub use geometry::{
    bearing_angle, normalize_angle, polar_from_world, world_from_polar, CameraSpec, DockingScene, LandmarkSpec,
    ObjectFootprint, ObjectSize, PolarState, Pose2D,
};
pub use perception::{perceive, LandmarkEstimate, PerceptionParams, PointCloud};
pub use simulator::{
    apply_dead_zone, fov_check, run_episode, ActuatorModel, EpisodeParams, EpisodeResult, EstimatorSetup, InitialState,
    MeasurementSource, Outcome, SafetyRegion, Termination,
};
