use std::io;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid grid: {0}")]
    InvalidGrid(String),

    #[error("fields live on different grids")]
    GridMismatch,

    #[error("non-finite value in {0}")]
    NonFinite(String),

    #[error("energy increased by {rel_jump:.3e} (relative) at step {step} with no forcing")]
    StabilityViolation { step: usize, rel_jump: f64 },

    #[error("solver failure: {0}")]
    SolverFailure(String),

    #[error("vortex configuration too close: rho = {rho:.4e} must exceed {limit:.4e}")]
    ConfigTooClose { rho: f64, limit: f64 },

    #[error("vortex configuration too tight for initial data: rho = {rho:.4e} must exceed {limit:.4e}")]
    ConfigTooTight { rho: f64, limit: f64 },

    #[error("cluster winding {winding} is not +1 or -1")]
    DegreeOutOfRange { winding: i32 },

    #[error("vortex cluster touches the boundary collar near ({x:.4}, {y:.4})")]
    BoundaryContamination { x: f64, y: f64 },

    #[error("tracking lost: {0}")]
    TrackingLost(String),

    #[error("invalid test function: {0}")]
    TestFunctionInvalid(String),

    #[error("no convergence: {0}")]
    NoConvergence(String),

    #[error("step size underflow at t = {t:.6e}")]
    StepUnderflow { t: f64 },

    #[error("records cover different horizons: {0}")]
    HorizonMismatch(String),

    #[error("inadmissible external fields: {0}")]
    Inadmissible(String),

    #[error("config error at `{key}`: {msg}")]
    Config { key: String, msg: String },

    #[error("malformed snapshot: {0}")]
    Snapshot(String),

    #[error(transparent)]
    Io(#[from] io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

/// Process exit code for configuration errors.
pub const EXIT_CONFIG: i32 = 2;
/// Process exit code for numerical failures.
pub const EXIT_NUMERICAL: i32 = 3;
/// Process exit code for lost vortex tracking.
pub const EXIT_TRACKING: i32 = 4;

impl Error {
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Config { .. }
            | Error::Inadmissible(_)
            | Error::ConfigTooTight { .. }
            | Error::InvalidGrid(_)
            | Error::HorizonMismatch(_) => EXIT_CONFIG,
            Error::TrackingLost(_) => EXIT_TRACKING,
            _ => EXIT_NUMERICAL,
        }
    }

    pub fn config(key: impl Into<String>, msg: impl Into<String>) -> Self {
        Error::Config {
            key: key.into(),
            msg: msg.into(),
        }
    }
}
