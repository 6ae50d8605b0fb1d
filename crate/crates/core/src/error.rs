use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("failed to parse scenario: {0}")]
    Parse(String),

    #[error("invalid scenario: {0}")]
    Validation(String),

    #[error("zero speed at slot {slot}: the propulsion model is singular")]
    ZeroSpeed { slot: usize },

    #[error("no feasible initial trajectory: {0}")]
    InfeasibleInit(String),

    #[error("expansion point is not feasible for the convex subproblem: {0}")]
    InfeasibleExpansion(String),

    #[error("solver failed ({status:?}) at outer iteration {outer}, inner iteration {inner}")]
    Solver { status: crate::solver::Status, outer: usize, inner: usize },

    #[error("starting point is not strictly feasible: {0}")]
    InfeasibleStart(String),

    #[error("objective decreased by {drop:.3e} (relative) at outer iteration {outer}")]
    NonMonotone { outer: usize, drop: f64 },

    #[error("Dinkelbach parameter fell from {from} to {to} at outer iteration {outer}, inner iteration {inner}")]
    LambdaDecrease { outer: usize, inner: usize, from: f64, to: f64 },

    #[error("surrogate rate sum {surrogate} exceeds the exact value {exact} at outer iteration {outer}, inner iteration {inner}")]
    SurrogateAboveExact { outer: usize, inner: usize, surrogate: f64, exact: f64 },

    #[error("malformed {what}: {reason}")]
    Malformed { what: &'static str, reason: String },

    #[error("unknown {what}: {value}")]
    Unknown { what: &'static str, value: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}
