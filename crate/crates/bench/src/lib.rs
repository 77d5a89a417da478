//! Fixtures shared by the benchmarks.

use std::f64::consts::{FRAC_PI_2, FRAC_PI_3};

use fovdock_core::feasible::sweep_params;
use fovdock_core::perception::{synth_chair_cloud, CloudSampling};
use fovdock_core::{AxisRange, DockingConfig, FeasibilityLabel, PointCloud, Pose2D, StateGrid};

pub fn preset(name: &str) -> DockingConfig {
    DockingConfig::preset(name).expect("bundled preset")
}

/// 9 x 9 x 9 grid over the default sampled space.
pub fn small_grid() -> StateGrid {
    StateGrid {
        rho: AxisRange::new(0.1, 2.0, 9),
        alpha: AxisRange::new(-FRAC_PI_3, FRAC_PI_3, 9),
        phi: AxisRange::new(-FRAC_PI_3, FRAC_PI_3, 9),
    }
}

/// Labels of the preset's full grid.
pub fn labels(cfg: &DockingConfig) -> Vec<FeasibilityLabel> {
    fovdock_core::sweep(&cfg.grid, &sweep_params(cfg).expect("valid preset")).expect("sweep runs")
}

/// Noisy chair cloud 2 m ahead of the camera.
pub fn chair_cloud(cfg: &DockingConfig) -> PointCloud {
    let robot = Pose2D::new(0.0, 0.0, FRAC_PI_2);
    let chair = cfg.object.at(Pose2D::new(0.0, cfg.camera.l + 2.0, -FRAC_PI_2));
    let sampling = CloudSampling {
        noise_sigma: 0.01,
        seed: 1,
        ..CloudSampling::default()
    };
    synth_chair_cloud(&chair, &cfg.chair, &robot, &cfg.camera, &sampling).expect("chair in view")
}
