use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid chart: {0}")]
    InvalidChart(String),

    #[error("grid needs at least 3 nodes per axis, got {nx}x{ny}")]
    GridTooSmall { nx: usize, ny: usize },

    #[error("grid and structure charts do not match")]
    GridMismatch,

    #[error("length mismatch: expected {expected}, got {got}")]
    LengthMismatch { expected: usize, got: usize },

    #[error("invalid boundary specification: {0}")]
    InvalidBoundary(String),

    #[error("density must be positive, got {value} at ({x}, {y})")]
    NonPositiveDensity { x: f64, y: f64, value: f64 },

    #[error("non-finite coefficient at ({x}, {y})")]
    NonFiniteCoefficient { x: f64, y: f64 },

    #[error("vector is zero")]
    ZeroVector,

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("eigensolver did not converge: residuals {residuals:?} above tolerance {tol}")]
    NotConverged { residuals: Vec<f64>, tol: f64 },

    #[error("factorization failed: {0}")]
    Factorization(String),

    #[error("degenerate function: {0}")]
    DegenerateFunction(String),

    #[error("level {t} outside the open range ({min}, {max})")]
    LevelOutOfRange { t: f64, min: f64, max: f64 },

    #[error("segment endpoint ({x}, {y}) outside the chart")]
    SegmentOutsideChart { x: f64, y: f64 },

    #[error("wrong structure: {0}")]
    WrongStructure(String),

    #[error("function does not vanish on the Dirichlet boundary (max |u| there = {0})")]
    BoundaryNotVanishing(f64),

    #[error("invalid certificate: {0}")]
    InvalidCertificate(String),

    #[error("ODE integration failed: {0}")]
    Integrator(String),

    #[error("search window exhausted after {} of {requested} roots", found.len())]
    WindowExhausted { found: Vec<f64>, requested: usize },

    #[error("insufficient data: {0}")]
    InsufficientData(String),

    #[error("dimension mismatch: {left} vs {right}")]
    DimensionMismatch { left: usize, right: usize },

    #[error("unsupported: {0}")]
    Unsupported(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}
