use thiserror::Error;

/// Failures raised by the engine. Mathematical outcomes that are data (empty
/// moduli, forced vanishing, axiom violations) are not errors and are reported
/// through dedicated result types instead.
#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum Error {
    #[error("coefficient rings differ")]
    RingMismatch,
    #[error("variable {0} does not belong to the coefficient ring")]
    InvalidVariable(String),
    #[error("substitution image is not congruent to {0} modulo the maximal ideal")]
    ImageNotCongruent(&'static str),
    #[error("invalid model parameters: {0}")]
    InvalidParams(String),
    #[error("invalid marking data: {0}")]
    InvalidMarking(String),
    #[error("cell outside the declared domain: {0}")]
    OutOfDomain(String),
    #[error("invalid critical key: {0}")]
    InvalidCriticalKey(String),
    #[error("chamber index is not symmetric: {0}")]
    NotSymmetric(String),
    #[error("chamber index fails the axioms: {0}")]
    AxiomViolation(String),
    #[error("potential violates the precondition W = x^r + y^s mod m: {0}")]
    NotAPerturbation(String),
    #[error("period integral has an unexpected shape: {0}")]
    NonconformingSeries(String),
    #[error("image potential has a monomial off the balanced keys: {0}")]
    StrayMonomial(String),
    #[error("connect failed to match {0}")]
    ConnectMismatch(String),
    #[error("two insertions carry twist -1 in the same coordinate")]
    DoubleNegative,
    #[error("no insertion can serve as the distinguished point: {0}")]
    NoDistinguishedInsertion(String),
    #[error("internal consistency failure: {0}")]
    Internal(String),
}

pub type Result<T> = std::result::Result<T, Error>;
