use thiserror::Error;

/// Errors raised across the analysis and synthesis pipeline.
#[derive(Debug, Clone, Error, PartialEq)]
pub enum Error {
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("delay {index} is not strictly positive ({value})")]
    NonpositiveDelay { index: usize, value: f64 },

    #[error(
        "U^T A_0 V is numerically singular (smallest singular value {sigma_min:.3e} <= {threshold:.3e}); \
         the system may be high-index or of advanced type"
    )]
    AssumptionOneViolated { sigma_min: f64, threshold: f64 },

    #[error("characteristic matrix is singular at lambda = {re} + {im}j")]
    SingularAtLambda { re: f64, im: f64 },

    #[error("difference part is singular at theta = {0:?}")]
    SingularAtTheta(Vec<f64>),

    #[error("Gauss-Newton correction diverged: {0}")]
    CorrectionDiverged(String),

    #[error("Gauss-Newton stopped after {iterations} iterations with residual {residual:.3e}")]
    MaxIterExceeded { iterations: usize, residual: f64 },

    #[error("algebraic loop at the initial parameters: {0}")]
    AlgebraicLoop(String),

    #[error("index {index} out of range (length {len})")]
    IndexOutOfRange { index: usize, len: usize },

    #[error("generalized eigenvalue solver failed: {0}")]
    EigSolverFailure(String),

    #[error(
        "system is not strongly exponentially stable (spectral abscissa {abscissa:.4e}, \
         difference radius {difference_radius:.6})"
    )]
    NotStable { abscissa: f64, difference_radius: f64 },

    #[error("level-set prediction did not terminate within {0} levels")]
    MaxLevelsExceeded(usize),

    #[error("objective is not differentiable here: {0}")]
    NonsmoothPoint(String),

    #[error("initial parameters give an unstable closed loop: {0}")]
    InfeasibleStart(String),

    #[error("invalid option: {0}")]
    InvalidOption(String),

    #[error("parse error: {0}")]
    Parse(String),

    #[error("i/o error: {0}")]
    Io(String),
}

pub type Result<T> = std::result::Result<T, Error>;

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

impl From<serde_json::Error> for Error {
    fn from(e: serde_json::Error) -> Self {
        Error::Parse(format!("{} (line {}, column {})", e, e.line(), e.column()))
    }
}
