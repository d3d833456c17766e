//! Closed-form entanglement and classical-communication cost bounds.

mod bell;
mod bounds;
mod expr;
mod recommend;

pub use bell::{bell, bell_sequence, log2_biguint};
pub use bounds::{
    bound_classical, bound_controlled, bound_permutation, bound_rank3, CostAlternative,
    CostReport, CostSource,
};
pub use expr::CostExpr;
pub use recommend::recommend;
