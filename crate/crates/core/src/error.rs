use thiserror::Error;

/// Errors raised anywhere in the simulator.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum QError {
    #[error("capacity exceeded: {entries} entries requested, cap is {cap}")]
    Capacity { entries: usize, cap: usize },
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("unknown register label `{0}`")]
    UnknownLabel(String),
    #[error("duplicate register label `{0}`")]
    DuplicateLabel(String),
    #[error("operator is not unitary (residual {0:.3e})")]
    NotUnitary(f64),
    #[error("Kraus set is not trace preserving (residual {0:.3e})")]
    NotTracePreserving(f64),
    #[error("matrix is not positive semidefinite (min eigenvalue {0:.3e})")]
    NotPsd(f64),
    #[error("invalid state: {0}")]
    InvalidState(String),
    #[error("operation requires a pure (unitary) program")]
    MixedProgram,
    #[error("not a block encoding: M†M deviates from scalar identity by {0:.3e}")]
    NotBlockEncoding(f64),
    #[error("degenerate superposition: success probability {0:.3e}")]
    DegenerateSuperposition(f64),
    #[error("projectors do not resolve the identity (residual {0:.3e})")]
    NotResolution(f64),
    #[error("empty input: {0}")]
    Empty(String),
    #[error("locality violation: {0}")]
    Locality(String),
    #[error("resource error: {0}")]
    Resource(String),
    #[error("non-finite value: {0}")]
    NonFinite(String),
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
}

pub type Result<T> = std::result::Result<T, QError>;
