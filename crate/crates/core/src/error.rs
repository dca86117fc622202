use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("domain mismatch: {left} vs {right} elements")]
    DomainMismatch { left: usize, right: usize },

    #[error("invalid distribution: {0}")]
    InvalidDistribution(String),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("conditioning on a subset of zero mass")]
    ZeroMassSubset,

    #[error("family has no functions")]
    EmptyFamily,

    #[error("domain of size {size} exceeds the limit of {limit}")]
    DomainTooLarge { size: usize, limit: usize },

    #[error("work estimate {needed} exceeds budget {budget}: {what}")]
    BudgetExceeded {
        needed: u128,
        budget: u128,
        what: &'static str,
    },

    #[error("parse error: {0}")]
    Parse(String),

    #[error("multicalibration did not converge after {rounds} rounds: {detail}")]
    MaxRoundsExceeded { rounds: usize, detail: String },

    #[error("structural violation on part {part}: {detail}")]
    StructuralViolation { part: usize, detail: String },

    #[error("invariant violated: {0}")]
    Invariant(String),

    #[error("solver did not converge: {0}")]
    SolverDidNotConverge(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub(crate) fn check_domain(left: usize, right: usize) -> Result<()> {
        if left == right {
            Ok(())
        } else {
            Err(Error::DomainMismatch { left, right })
        }
    }
}
