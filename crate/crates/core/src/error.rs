use thiserror::Error;

/// Errors raised by the numerical routines.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("Hurst index {0} outside the open interval (0, 1/2)")]
    InvalidHurst(f64),
    #[error("fractional order {0} outside the open interval (0, 1)")]
    InvalidOrder(f64),
    #[error("invalid grid: {0}")]
    InvalidGrid(String),
    #[error("grid mismatch: {0}")]
    GridMismatch(String),
    #[error("time {0} is not a grid node")]
    NotANode(f64),
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("quadrature did not converge for {what}: estimate {value}, error {error}")]
    Quadrature { what: String, value: f64, error: f64 },
    #[error("divergent integral: {0}")]
    Divergent(String),
    #[error("non-finite value in {what} at step {step}")]
    BlowUp { what: String, step: usize },
    #[error("rank-deficient regression at node {node}: condition number {condition:.3e}")]
    RankDeficient { node: usize, condition: f64 },
    #[error("explicit scheme violates the stability bound: dt = {dt:.3e}, use at most {max_dt:.3e}")]
    Cfl { dt: f64, max_dt: f64 },
    #[error("hypothesis check failed: {0}")]
    Hypothesis(String),
    #[error("singular tangent flow (|det| = {det:.3e}) at node {node}")]
    SingularFlow { node: usize, det: f64 },
    #[error("unsupported: {0}")]
    Unsupported(String),
    #[error("i/o: {0}")]
    Io(String),
}

pub type Result<T> = std::result::Result<T, Error>;

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

impl From<csv::Error> for Error {
    fn from(e: csv::Error) -> Self {
        Error::Io(e.to_string())
    }
}
