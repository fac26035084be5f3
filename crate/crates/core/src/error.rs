use thiserror::Error;

/// Errors shared by every module of the crate.
#[derive(Debug, Error)]
pub enum Error {
    #[error("grid needs at least {min} points, got {got}")]
    GridTooSmall { min: usize, got: usize },

    #[error("invalid grid: {0}")]
    InvalidGrid(String),

    #[error("operands live on different grids")]
    GridMismatch,

    #[error("field contains a non-finite value at node {index}")]
    NonFinite { index: usize },

    #[error("density is degenerate: {0}")]
    DegenerateDensity(String),

    #[error("density not normalized: mass = {mass}")]
    NotNormalized { mass: f64 },

    #[error("domain error: {0}")]
    Domain(String),

    #[error("caustic time t = {t}: oscillator propagator is singular where sin t = 0")]
    CausticTime { t: f64 },

    #[error("box too small: {0}")]
    BoxTooSmall(String),

    #[error("numerical stability: {0}")]
    Stability(String),

    #[error("large-friction regime requires t > 1/(2 beta) = {bound}, got t = {t}")]
    Regime { t: f64, bound: f64 },

    #[error("infeasible constraint: {0}")]
    InfeasibleConstraint(String),

    #[error("eigenvalue solver failed: {0}")]
    Spectrum(String),

    #[error("unsupported branch: gamma = {gamma} (expected -mD^2/2, +mD^2/2 or 0)")]
    UnsupportedBranch { gamma: f64 },

    #[error("internal consistency check failed: {0}")]
    Inconsistent(String),
}

pub type Result<T> = std::result::Result<T, Error>;
