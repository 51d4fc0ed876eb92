use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid size: {0}")]
    InvalidSize(String),

    #[error("long-range exponent {0} must exceed 1 (row sums diverge otherwise)")]
    Divergence(f64),

    #[error("validation failed: {0}")]
    Validation(String),

    #[error("node index {index} outside 1..={n}")]
    NodeOutOfRange { index: usize, n: usize },

    #[error("start node {0} is a trap")]
    InvalidStart(usize),

    #[error("invalid configuration: {0}")]
    InvalidConfiguration(String),

    #[error("matrix is not complex symmetric (max |H - H^T| = {0:e})")]
    NotSymmetric(f64),

    #[error("exceptional point: eigenpairs {first} and {second} coalesce (residual {residual:e})")]
    ExceptionalPoint {
        first: usize,
        second: usize,
        residual: f64,
    },

    #[error("sign convention violated: gamma[{index}] = {value:e} < 0")]
    SignConvention { index: usize, value: f64 },

    #[error("eigensolver failed to converge after {0} iterations")]
    NoConvergence(usize),

    #[error("invalid time grid: {0}")]
    InvalidGrid(String),

    #[error("step size underflow: {0} steps required")]
    StepUnderflow(f64),

    #[error("invalid fit window: {0}")]
    InvalidWindow(String),

    #[error("no crossover found: {0}")]
    NoCrossover(String),

    #[error("curve windows do not overlap: {0}")]
    NoOverlap(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    /// Stable machine-readable tag used in CLI error reports.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::InvalidSize(_) => "invalid_size",
            Error::Divergence(_) => "divergence",
            Error::Validation(_) => "validation",
            Error::NodeOutOfRange { .. } => "node_out_of_range",
            Error::InvalidStart(_) => "invalid_start",
            Error::InvalidConfiguration(_) => "invalid_configuration",
            Error::NotSymmetric(_) => "not_symmetric",
            Error::ExceptionalPoint { .. } => "exceptional_point",
            Error::SignConvention { .. } => "sign_convention",
            Error::NoConvergence(_) => "no_convergence",
            Error::InvalidGrid(_) => "invalid_grid",
            Error::StepUnderflow(_) => "step_underflow",
            Error::InvalidWindow(_) => "invalid_window",
            Error::NoCrossover(_) => "no_crossover",
            Error::NoOverlap(_) => "no_overlap",
            Error::Io(_) => "io",
            Error::Json(_) => "json",
            Error::Csv(_) => "csv",
        }
    }
}
