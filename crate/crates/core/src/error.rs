use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid truncation level k = {0} (need k > 0)")]
    InvalidLevel(f64),
    #[error("invalid smoothing width eps = {eps} for level k = {k} (need 0 < eps < k)")]
    InvalidWidth { k: f64, eps: f64 },
    #[error("invalid grid: {0}")]
    InvalidGrid(String),
    #[error("invalid shape: {0}")]
    InvalidShape(String),
    #[error("invalid field: {0}")]
    InvalidField(String),
    #[error("staggering mismatch: expected {expected}, found {found}")]
    InvalidStaggering {
        expected: &'static str,
        found: &'static str,
    },
    #[error("grid mismatch between operands")]
    GridMismatch,
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("inner solver did not converge at step {step} (t = {time}): relative gap {gap:e} after {iters} iterations")]
    InnerNoConvergence {
        step: usize,
        time: f64,
        gap: f64,
        iters: usize,
    },
    #[error("linear solve stagnated at step {step}: relative residual {residual:e} after {iters} iterations")]
    LinearSolveStagnation {
        step: usize,
        residual: f64,
        iters: usize,
    },
    #[error("time grid mismatch: {0}")]
    TimeGridMismatch(String),
    #[error("parameter out of range: {0}")]
    InvalidRange(String),
    #[error("experiment inputs invalid: {0}")]
    InvalidInputs(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error("{path}: dimension mismatch (expected {expected}, found {found})")]
    DimensionMismatch {
        path: String,
        expected: String,
        found: String,
    },
    #[error("{path}: parse error: {msg}")]
    Parse { path: String, msg: String },
    #[error(transparent)]
    Config(#[from] crate::io::config::ConfigError),
}
