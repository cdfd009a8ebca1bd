use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid probability measure: {0}")]
    InvalidMeasure(String),
    #[error("invalid potential: {0}")]
    InvalidPotential(String),
    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),
    #[error("index {index} out of range for {len} coordinates")]
    IndexOutOfRange { index: usize, len: usize },
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("brute-force cap exceeded: {0}")]
    CapExceeded(String),
    #[error("margins disagree on the sample size: {0}")]
    InconsistentMargins(String),
    #[error("enumeration budget of {budget} tensors exceeded")]
    BudgetExceeded { budget: u64 },
    #[error("no convergence after {iterations} iterations (residual {residual:e})")]
    NonConvergence { iterations: usize, residual: f64 },
    #[error("empty support: {0}")]
    EmptySupport(String),
    #[error("infeasible window: {0}")]
    InfeasibleWindow(String),
    #[error("expression error: {0}")]
    Expression(String),
}

pub type Result<T> = std::result::Result<T, Error>;
