//! Docking configuration: TOML ingestion, defaults, cross-validation and
//! the bundled presets.

use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::controller::{design_k3, Gains, DEFAULT_K1, DEFAULT_K2};
use crate::error::{DockError, Result};
use crate::estimation::EstimationParams;
use crate::feasible::StateGrid;
use crate::geometry::{CameraSpec, LandmarkSpec, ObjectSize};
use crate::perception::{ChairGeometry, PerceptionParams};
use crate::simulator::{ActuatorModel, SafetyRegion};

const CASE1: &str = include_str!("../presets/case1.toml");
const CASE2: &str = include_str!("../presets/case2.toml");

/// Names accepted by [`DockingConfig::preset`].
pub const PRESETS: [&str; 2] = ["case1", "case2"];

/// Gains as configured; a missing `k3` is synthesized from the geometry.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GainsConfig {
    pub k1: f64,
    pub k2: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub k3: Option<f64>,
}

impl Default for GainsConfig {
    fn default() -> Self {
        Self {
            k1: DEFAULT_K1,
            k2: DEFAULT_K2,
            k3: None,
        }
    }
}

/// Fixed-step integration settings.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct IntegrationParams {
    pub dt: f64,
    pub t_max: f64,
    /// Both wheels idle for this long counts as a stall.
    pub stall_window: f64,
}

impl Default for IntegrationParams {
    fn default() -> Self {
        Self {
            dt: 0.01,
            t_max: 120.0,
            stall_window: 1.0,
        }
    }
}

impl IntegrationParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.dt > 0.0 && self.dt.is_finite()) {
            return Err(DockError::invalid("integration.dt", "must be > 0"));
        }
        if !(self.t_max > 0.0) {
            return Err(DockError::invalid("integration.t_max", "must be > 0"));
        }
        if !(self.stall_window > 0.0) {
            return Err(DockError::invalid("integration.stall_window", "must be > 0"));
        }
        Ok(())
    }
}

/// Everything a docking run needs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DockingConfig {
    #[serde(default)]
    pub seed: u64,
    pub camera: CameraSpec,
    pub landmark: LandmarkSpec,
    pub object: ObjectSize,
    #[serde(default)]
    pub gains: GainsConfig,
    #[serde(default)]
    pub actuator: ActuatorModel,
    #[serde(default)]
    pub safety: SafetyRegion,
    #[serde(default)]
    pub integration: IntegrationParams,
    #[serde(default)]
    pub grid: StateGrid,
    #[serde(default)]
    pub perception: PerceptionParams,
    #[serde(default)]
    pub chair: ChairGeometry,
    #[serde(default)]
    pub estimation: EstimationParams,
}

impl DockingConfig {
    /// Parses and validates TOML text.
    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: DockingConfig = toml::from_str(text).map_err(|e| DockError::Parse(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    /// A bundled preset by name.
    pub fn preset(name: &str) -> Result<Self> {
        match name {
            "case1" => Self::from_toml(CASE1),
            "case2" => Self::from_toml(CASE2),
            other => Err(DockError::invalid(
                "config",
                format!("unknown preset `{other}` (available: {})", PRESETS.join(", ")),
            )),
        }
    }

    /// Canonical TOML dump with all defaults filled in.
    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes to TOML")
    }

    /// SHA-256 of the canonical dump, hex encoded.
    pub fn hash(&self) -> String {
        let digest = Sha256::digest(self.to_toml().as_bytes());
        digest.iter().map(|b| format!("{b:02x}")).collect()
    }

    pub fn validate(&self) -> Result<()> {
        self.camera.validate()?;
        self.landmark.validate()?;
        self.landmark.validate_with(&self.camera)?;
        self.object.validate()?;
        self.actuator.validate()?;
        self.safety.validate()?;
        self.integration.validate()?;
        self.grid.validate()?;
        self.perception.validate()?;
        self.chair.validate()?;
        self.estimation.validate()?;
        // also checks that a usable k3 exists for this geometry
        self.resolved_gains()?;
        Ok(())
    }

    /// Gains with `k3` synthesized when not given explicitly.
    pub fn resolved_gains(&self) -> Result<Gains> {
        let g = &self.gains;
        // the synthesis precondition is checked even when k3 is pinned
        let designed = design_k3(g.k1, g.k2, &self.camera, &self.landmark)?;
        Gains::new(g.k1, g.k2, g.k3.unwrap_or(designed))
    }
}

/// Loads a config from a file path, or a bundled preset when `source` names one
/// and no such file exists.
pub fn load_config(source: &str) -> Result<DockingConfig> {
    let path = Path::new(source);
    if path.is_file() {
        let text = std::fs::read_to_string(path)?;
        return DockingConfig::from_toml(&text);
    }
    if PRESETS.contains(&source) {
        return DockingConfig::preset(source);
    }
    Err(DockError::Io(format!(
        "config `{source}` is neither a file nor a preset"
    )))
}
