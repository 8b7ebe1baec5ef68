use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid mesh resolution {0}: need at least 2 squares per side")]
    InvalidResolution(usize),

    #[error("quadrature degree {0} outside supported range 0..={1}")]
    UnsupportedQuadratureDegree(usize, usize),

    #[error("unsupported element {family} of order {order}")]
    UnsupportedElement { family: String, order: usize },

    #[error("degenerate cell {cell}: jacobian determinant {det:e}")]
    DegenerateCell { cell: usize, det: f64 },

    #[error("space mismatch: {0}")]
    SpaceMismatch(String),

    #[error("advecting field is not divergence free (|div| = {0:e})")]
    NotDivergenceFree(f64),

    #[error("stream function is not constant on the boundary (spread {0:e})")]
    StreamNotConstantOnBoundary(f64),

    #[error("singular matrix: zero pivot at row {row}")]
    SingularMatrix { row: usize },

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("newton iteration did not converge after {iterations} iterations (residual history {history:?})")]
    NewtonDiverged { iterations: usize, history: Vec<f64> },

    #[error("time step {step}: {source}")]
    StepFailed { step: usize, source: Box<Error> },

    #[error("invalid cell loop: {0}")]
    InvalidLoop(String),

    #[error("scalar space order must be at least 1 for the hat map")]
    HatNeedsLinearScalars,

    #[error("configuration error: {0}")]
    Config(String),

    #[error("i/o error: {0}")]
    Io(String),
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
