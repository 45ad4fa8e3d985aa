use thiserror::Error;

/// Errors raised by the discretization, assembly and solver layers.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    /// A parameter value lies outside the domain of an operation.
    #[error("domain error: {0}")]
    Domain(String),
    /// Inconsistent or unsupported discretization settings.
    #[error("configuration error: {0}")]
    Config(String),
    /// The geometry map has a non-positive Jacobian determinant.
    #[error("degenerate geometry: det J = {det:e} at {point:?}")]
    DegenerateGeometry { det: f64, point: [f64; 3] },
    /// An iterative solver stopped before reaching its tolerance.
    #[error("solver did not converge after {iterations} iterations (relative residual {residual:e})")]
    NonConvergence { iterations: usize, residual: f64 },
    /// A factorization or dense solve failed.
    #[error("linear algebra failure: {0}")]
    LinearAlgebra(String),
    /// A physical point could not be located inside the domain.
    #[error("point {0:?} lies outside the domain")]
    PointOutside([f64; 3]),
    #[error("size guard exceeded: {size} > {limit}")]
    TooLarge { size: usize, limit: usize },
    #[error("unknown {kind}: {name}")]
    Unknown { kind: &'static str, name: String },
    #[error("I/O error: {0}")]
    Io(String),
    /// A file could not be parsed.
    #[error("malformed {kind} input: {msg}")]
    Format { kind: &'static str, msg: String },
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
