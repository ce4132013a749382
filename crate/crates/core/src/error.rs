use thiserror::Error;

use mcse_conic::ConicError;

#[derive(Debug, Error)]
pub enum CoreError {
    #[error("line {line}: {msg}")]
    Parse { line: usize, msg: String },
    #[error("invalid case: {0}")]
    Validation(String),
    #[error("load-bus admittance block is singular (condition estimate {condition:.3e})")]
    SingularAdmittance { condition: f64 },
    #[error("zero-load voltage at bus {bus} is {magnitude:.3e} pu")]
    DegenerateFeeder { bus: usize, magnitude: f64 },
    #[error("AC power flow did not converge in {iterations} iterations (residual {residual:.3e})")]
    Divergence { iterations: usize, residual: f64 },
    #[error("dimension mismatch: {0}")]
    Dimension(String),
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("solver finished with status {0}")]
    NotOptimal(mcse_conic::SolveStatus),
    #[error(transparent)]
    Conic(#[from] ConicError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub type Result<T, E = CoreError> = std::result::Result<T, E>;
