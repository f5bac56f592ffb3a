use thiserror::Error;

/// Errors raised by the library.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("block structure must contain at least one block of positive size")]
    EmptyStructure,

    #[error("shape mismatch: expected {expected}, found {found}")]
    ShapeMismatch { expected: String, found: String },

    #[error("density matrix is not Hermitian (deviation {0:e})")]
    NotHermitian(f64),

    #[error("density matrix trace is {0}, expected 1")]
    BadTrace(f64),

    #[error("state is not faithful: minimum eigenvalue {0:e} is below the faithfulness threshold")]
    NotFaithful(f64),

    #[error("invalid L^p index {0}: p must satisfy p >= 1")]
    InvalidLpIndex(f64),

    #[error("map is not stationary (state residual {state_residual:e}, modular residual {modular_residual:e})")]
    NotStationary { state_residual: f64, modular_residual: f64 },

    #[error("map does not preserve the state (residual {0:e})")]
    NotStatePreserving(f64),

    #[error("precondition violated: {0}")]
    Precondition(String),

    #[error("span is not a unital *-subalgebra (closure residual {0:e})")]
    NotAnAlgebra(f64),

    #[error("subalgebra is not invariant under the modular group (residual {0:e})")]
    NotModularInvariant(f64),

    #[error("degenerate transition system: {0}")]
    DegenerateSystem(String),

    #[error("invalid transition system: {0}")]
    InvalidTransitionSystem(String),

    #[error("resource cap exceeded: {what} requires {requested}, cap is {cap}")]
    ResourceCap { what: String, requested: u128, cap: u128 },

    #[error("index out of range: {0}")]
    IndexOutOfRange(String),

    #[error("pairing residual {0:e} above tolerance")]
    PairingResidual(f64),

    #[error("singular linear system: {0}")]
    Singular(String),

    #[error("verification of {what} failed (residual {residual:e})")]
    VerificationFailed { what: String, residual: f64 },
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn shape_mismatch(expected: impl ToString, found: impl ToString) -> Error {
    Error::ShapeMismatch {
        expected: expected.to_string(),
        found: found.to_string(),
    }
}
