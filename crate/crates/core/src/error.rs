use thiserror::Error;

/// Errors raised by series evaluation, root finding and verification.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum QError {
    #[error("domain error: {0}")]
    Domain(String),
    #[error("division by zero: {0}")]
    DivisionByZero(String),
    #[error("not converged after {terms} terms: {what}")]
    NotConverged { what: String, terms: usize },
    #[error("|x| = {modulus} lies outside the admissible annulus ({inner}, {outer})")]
    OutsideAnnulus { modulus: f64, inner: f64, outer: f64 },
    #[error("winding number {found} does not match the expected zero count {expected}")]
    ZeroCountMismatch { expected: usize, found: f64 },
    #[error("Newton iteration stalled: {0}")]
    NewtonStall(String),
    #[error("no admissible probe point found: {0}")]
    ProbeDegenerate(String),
    #[error("branch jump while tracking a zero: {0}")]
    BranchJump(String),
    #[error("too close to a branch point: {0}")]
    NearBranchPoint(String),
    #[error("branch point hit at u = {0}")]
    BranchPointHit(String),
    #[error("quadrature failed: {0}")]
    QuadratureFail(String),
    #[error("degenerate interpolation nodes: {0}")]
    DegenerateNodes(String),
    #[error("recurrence guard failed: residual {residual:e}")]
    GuardFailed { residual: f64 },
    #[error("pole of the theta quotient: {0}")]
    PoleHit(String),
    #[error("inconsistent result: {0}")]
    Inconsistent(String),
    #[error("could not draw admissible samples: {0}")]
    Unsatisfiable(String),
}

pub type Result<T> = std::result::Result<T, QError>;
