use thiserror::Error;

/// Errors produced by design construction, evaluation, and solving.
#[derive(Debug, Error)]
pub enum Error {
    #[error("{what}: expected length {expected}, got {got}")]
    LengthMismatch {
        what: &'static str,
        expected: usize,
        got: usize,
    },

    #[error("design space must contain at least one point")]
    EmptySpace,

    #[error("duplicate point label `{0}`")]
    DuplicateLabel(String),

    #[error("matrix is not square: {rows} rows, {cols} cols")]
    NotSquare { rows: usize, cols: usize },

    #[error("matrix is not symmetric: |A[{i}][{j}] - A[{j}][{i}]| = {diff:.3e}")]
    NotSymmetric { i: usize, j: usize, diff: f64 },

    #[error("matrix is not positive semidefinite: eigenvalue {value:.6e} below tolerance")]
    NotPositiveSemidefinite { value: f64 },

    #[error("matrix rank exceeds the declared bound {bound}: {detail}")]
    RankExceeded { bound: usize, detail: String },

    #[error("constraint coefficients are not finite")]
    NonFiniteCoefficient,

    #[error("constraint has all-zero coefficients")]
    ZeroConstraint,

    #[error("invalid constraint specification: {0}")]
    InvalidConstraint(String),

    #[error("model parameter out of range: {0}")]
    InvalidModelParameter(String),

    #[error("reference design is singular; efficiency is undefined")]
    SingularReference,

    #[error("design is infeasible for the problem: {0}")]
    InfeasibleDesign(String),

    #[error("auxiliary problem is inconsistent: {0}")]
    InvalidAuxiliary(String),

    #[error("enumeration space too large: about {estimate:.3e} candidates exceeds cap {cap}")]
    EnumerationTooLarge { estimate: f64, cap: u64 },

    #[error("linear program failed: {0}")]
    LpFailure(String),

    #[error("parse error in {path}: {detail}")]
    Parse { path: String, detail: String },

    #[error("unknown point reference `{0}` in design file")]
    UnknownPoint(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}
