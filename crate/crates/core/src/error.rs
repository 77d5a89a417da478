use thiserror::Error;

/// Errors raised across the docking stack.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum DockError {
    #[error("domain error: {0}")]
    Domain(String),

    #[error("degenerate state: {0}")]
    DegenerateState(String),

    #[error("degenerate geometry: {0}")]
    DegenerateGeometry(String),

    #[error("degenerate configuration: {0}")]
    DegenerateConfig(String),

    #[error("infeasible configuration: {0}")]
    InfeasibleConfig(String),

    #[error("invalid parameter `{field}`: {reason}")]
    InvalidParameter { field: String, reason: String },

    #[error("no object found in point cloud")]
    NoObject,

    #[error("not a chair: {0}")]
    NotAChair(String),

    #[error("estimator phase error: {0}")]
    Phase(String),

    #[error("boundary fit failed: {0}")]
    FitFailure(String),

    #[error("parse error: {0}")]
    Parse(String),

    #[error("io error: {0}")]
    Io(String),
}

impl DockError {
    pub(crate) fn invalid(field: impl Into<String>, reason: impl Into<String>) -> Self {
        DockError::InvalidParameter {
            field: field.into(),
            reason: reason.into(),
        }
    }

    /// Short machine-readable tag used in error records.
    pub fn kind(&self) -> &'static str {
        match self {
            DockError::Domain(_) => "domain",
            DockError::DegenerateState(_) => "degenerate_state",
            DockError::DegenerateGeometry(_) => "degenerate_geometry",
            DockError::DegenerateConfig(_) => "degenerate_config",
            DockError::InfeasibleConfig(_) => "infeasible_config",
            DockError::InvalidParameter { .. } => "invalid_parameter",
            DockError::NoObject => "no_object",
            DockError::NotAChair(_) => "not_a_chair",
            DockError::Phase(_) => "phase",
            DockError::FitFailure(_) => "fit_failure",
            DockError::Parse(_) => "parse",
            DockError::Io(_) => "io",
        }
    }
}

impl From<std::io::Error> for DockError {
    fn from(err: std::io::Error) -> Self {
        DockError::Io(err.to_string())
    }
}

pub type Result<T> = std::result::Result<T, DockError>;
