//! Dense complex linear algebra for bipartite operators.
//!
//! Everything here is exact-as-possible double precision: inputs are exact
//! constructions contaminated only by roundoff, so rank thresholds and gauge
//! tolerances are fixed at `1e-8` relative scale throughout.

mod bipartite;
mod choi;
mod eig;
mod entropy;
mod matrix;
mod schmidt;

pub use bipartite::BipartiteOp;
pub use choi::{choi_distance, choi_of_kraus, choi_of_unitary, kraus_channel_distance};
pub use eig::{hermitian_eigen, joint_block_structure, simultaneous_unitary_eigenbasis, unitary_eigenbasis};
pub use entropy::{entropy_of_spectrum, partial_trace, von_neumann_entropy};
pub use matrix::{
    apply_on_factor_pair, ident, kron_all, mat_approx_eq, perm_matrix, tensor, unitary_deviation,
    zeros, CMatrix, C64,
};
pub use schmidt::{distinct_values, operator_schmidt, reshuffle, schmidt_rank, OperatorSchmidt};
