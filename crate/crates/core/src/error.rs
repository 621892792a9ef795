use thiserror::Error;

/// Errors raised by lattice construction, operators, integrators and I/O.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid mesh: {0}")]
    InvalidMesh(String),

    #[error("fields live on different meshes")]
    MeshMismatch,

    #[error("field has {got} values but the mesh has {expected} points")]
    LengthMismatch { expected: usize, got: usize },

    #[error("non-finite value at index {index}")]
    NonFinite { index: usize },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("operator support width {width} does not fit a periodic mesh of {n_points} points")]
    SupportTooWide { width: usize, n_points: usize },

    #[error("operator is not skew-symmetric")]
    NotSkew,

    #[error("{what} requires a compact-support mesh")]
    RequiresCompactSupport { what: &'static str },

    #[error("{what} is not defined on a periodic mesh")]
    PeriodicNotAllowed { what: &'static str },

    #[error("series for c_{p} did not converge within {iterations} terms")]
    SeriesDivergence { p: usize, iterations: u64 },

    #[error("implicit midpoint solve did not converge: residual {residual:e} after {iterations} iterations")]
    SolverDivergence { residual: f64, iterations: usize },

    #[error("time grid mismatch at step {step}: expected t = {expected}, found {found}")]
    TimeGridMismatch {
        step: usize,
        expected: f64,
        found: f64,
    },

    #[error("decay check failed: edge magnitude {margin:e} exceeds threshold {threshold:e}")]
    DecayViolation { margin: f64, threshold: f64 },

    #[error("parse error: {0}")]
    Parse(String),

    #[error("invalid configuration:\n  {}", .0.join("\n  "))]
    Config(Vec<String>),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
