use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid MDP: {0}")]
    InvalidMdp(String),

    #[error("invalid policy: {0}")]
    InvalidPolicy(String),

    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("dimension mismatch: expected {expected}, got {actual}")]
    DimensionMismatch { expected: String, actual: String },

    #[error("state {0} is terminal")]
    TerminalState(usize),

    #[error("policy is improper: state {0} cannot reach a terminal state")]
    ImproperPolicy(usize),

    #[error("singular linear system")]
    SingularSystem,

    #[error("coefficients are not on the simplex (sum {sum}, min {min})")]
    SimplexViolation { sum: f64, min: f64 },

    #[error("strategy `{0}` needs the successor action")]
    MissingNextAction(String),

    #[error("unknown strategy `{0}`")]
    UnknownStrategy(String),
}

impl Error {
    pub(crate) fn param(name: &'static str, reason: impl Into<String>) -> Self {
        Error::InvalidParameter { name, reason: reason.into() }
    }
}
