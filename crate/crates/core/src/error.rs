use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("solver did not converge after {iterations} iterations (relative residual {residual:.3e})")]
    NonConvergence {
        iterations: usize,
        residual: f64,
        /// Best iterate reached, as `f64` node values.
        best: Vec<f64>,
    },
    #[error("constant coefficient matrix is not positive definite")]
    SingularSymbol,
    #[error("test function support (radius {radius}) exceeds half of the unit box")]
    SupportOverflow { radius: f64 },
    #[error("need at least {required} samples, got {got}")]
    InsufficientSamples { required: usize, got: usize },
    #[error("sample has zero variance")]
    DegenerateSample,
    #[error("need at least {required} points for a fit, got {got}")]
    InsufficientPoints { required: usize, got: usize },
    #[error("grid mismatch: {0}")]
    GridMismatch(String),
    #[error("invalid input: {0}")]
    InvalidInput(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
