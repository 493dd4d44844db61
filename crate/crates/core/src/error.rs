use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("line {line}: non-triangular face with {count} vertices")]
    NonTriangularFace { line: usize, count: usize },

    #[error("open surface: edge ({0}, {1}) is not shared by exactly two triangles")]
    OpenSurface(usize, usize),

    #[error("inconsistent orientation at edge ({0}, {1})")]
    InconsistentOrientation(usize, usize),

    #[error("triangle {0} is degenerate (zero area)")]
    DegenerateTriangle(usize),

    #[error("triangle {triangle} references vertex {vertex}, but the mesh has {count} vertices")]
    InvalidVertexIndex { triangle: usize, vertex: usize, count: usize },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: String, found: String },

    #[error("{what} did not converge after {iterations} iterations (relative residual {residual:e})")]
    NoConvergence { what: &'static str, iterations: usize, residual: f64, history: Vec<f64> },

    #[error("contract violation: {0}")]
    ContractViolation(String),

    #[error("coincident points in kernel evaluation")]
    CoincidentPoints,
}
