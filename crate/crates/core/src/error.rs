use std::path::PathBuf;

/// Errors raised by the solver, mesher and driver.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("element {0} is degenerate (zero or negative area)")]
    DegenerateElement(usize),

    #[error("mesh is not conforming: {0}")]
    NonConforming(String),

    #[error("point ({x}, {y}) lies outside the domain")]
    OutsideDomain { x: f64, y: f64 },

    #[error("time {t} precedes the start time {t0}")]
    InvalidTime { t: f64, t0: f64 },

    #[error("finite-difference stencil around ({x}, {y}) leaves the support")]
    StencilOutsideSupport { x: f64, y: f64 },

    #[error("diffusion matrix is not symmetric positive definite")]
    NotSpd,

    #[error("metric field has zero total mass (sigma_h = 0)")]
    EmptyMetric,

    #[error("length mismatch: expected {expected}, got {got}")]
    SizeMismatch { expected: usize, got: usize },

    #[error("sparse factorization failed: {0}")]
    Factorization(String),

    #[error("stiff failure at t = {t}: {reason}")]
    StiffFailure { t: f64, reason: String },

    #[error("configuration error: {0}")]
    Config(String),

    #[error("VTK parse error: {0}")]
    VtkParse(String),

    #[error("I/O error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
