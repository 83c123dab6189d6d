use thiserror::Error;

/// Errors raised by the simulator and the control pipeline.
#[derive(Debug, Clone, Error, PartialEq)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    /// The box length `ell0 + lambda * f(t)` reached zero or below.
    #[error("wall collision at t = {time}: box length {length} is not positive")]
    WallCollision { time: f64, length: f64 },

    #[error("no improvement: best fidelity {best_fidelity} stayed below {threshold}")]
    NoImprovement { best_fidelity: f64, threshold: f64 },

    #[error("budget exceeded: {0}")]
    BudgetExceeded(String),

    #[error("unsupported motion: {0}")]
    Unsupported(String),

    #[error("infeasible final ramp: |a| = {value} must stay below {limit}")]
    InfeasibleRamp { value: f64, limit: f64 },

    #[error("ambiguous eigenvector matching at eta = {eta} (overlap gap {gap})")]
    DegenerateMatching { eta: f64, gap: f64 },
}

impl Error {
    /// Process exit code used by the command-line front end.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::InvalidInput(_) | Error::InfeasibleRamp { .. } => 1,
            Error::NoImprovement { .. }
            | Error::BudgetExceeded(_)
            | Error::WallCollision { .. }
            | Error::DegenerateMatching { .. } => 2,
            Error::Unsupported(_) => 3,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
