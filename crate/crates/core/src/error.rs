//! Crate-wide error type.

use thiserror::Error;

/// Errors surfaced by analysis, simulation and synthesis routines.
#[derive(Debug, Error)]
pub enum Error {
    #[error("zero operator")]
    ZeroOperator,

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("matrix is not unitary (deviation {deviation:.3e})")]
    NotUnitary { deviation: f64 },

    #[error("matrix is not a permutation unitary")]
    NotPermutation,

    #[error("density matrix check failed: {check} (deviation {deviation:.3e})")]
    NotDensity { check: &'static str, deviation: f64 },

    #[error("operator has Schmidt rank {found}, expected {expected}")]
    WrongSchmidtRank { expected: usize, found: usize },

    #[error("operator is not controlled from the {side} side")]
    NotControlled { side: &'static str },

    #[error("invalid fixture parameters: {0}")]
    BadFixture(String),

    #[error("invalid input: {0}")]
    BadInput(String),

    #[error("structural invariant violated: {what} (residual {residual:.3e})")]
    StructureResidual { what: String, residual: f64 },

    #[error("group expansion residual {residual:.3e} exceeds tolerance")]
    ExpansionResidual { residual: f64 },

    #[error("group specification invalid: {0}")]
    BadGroup(String),

    #[error("no exact protocol mechanism for this representation: {0}")]
    UnsupportedRepresentation(String),

    #[error("protocol internal check failed at {step}: {detail}")]
    ProtocolFailure { step: &'static str, detail: String },

    #[error("search space too large: {0}")]
    SearchCap(String),

    #[error("classification failed: {0}")]
    Classification(String),

    #[error("parse error: {0}")]
    Parse(String),
}

pub type Result<T> = std::result::Result<T, Error>;
