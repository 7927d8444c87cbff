//! Error type shared across the crate.

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    /// Transport between measures of different total mass is undefined here;
    /// callers rescale by the per-label mass instead.
    #[error("total masses differ: {0} vs {1}")]
    MassMismatch(f64, f64),

    #[error("measure has no atoms")]
    EmptyMeasure,

    #[error("kinetic cloud has no samples")]
    EmptyCloud,

    #[error("all {count} labels coincide but {requested} bins were requested")]
    DegenerateLabels { count: usize, requested: usize },

    #[error("quantile level {level} outside (0, {mass}]")]
    OutOfRange { level: f64, mass: f64 },

    #[error("time {t} outside [0, {horizon}]")]
    TimeOutOfRange { t: f64, horizon: f64 },

    #[error("label grids differ")]
    GridMismatch,

    #[error("instance too large: {size} atoms exceeds cap {cap}")]
    TooLarge { size: usize, cap: usize },

    #[error("inner solver diverged at step {step}: gap {gap:.3e} exceeds tolerance {tol:.3e}")]
    SolverDiverged { step: usize, gap: f64, tol: f64 },

    #[error("CFL violation: dt {dt:.3e} exceeds {limit:.3e}")]
    CflViolation { dt: f64, limit: f64 },

    #[error("invalid interval: {0}")]
    InvalidInterval(String),

    #[error("invalid input: {0}")]
    Invalid(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
