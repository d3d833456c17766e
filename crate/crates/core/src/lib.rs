//! Analysis and LOCC implementation of bipartite unitary and permutation operators.
//!
//! The crate is organized around a handful of subsystems:
//!
//! - [`core_linalg`]: dense complex linear algebra on bipartite operators —
//!   tensor products, operator-Schmidt decomposition, entropies, Choi matrices.
//! - [`structure`]: structural analysis — block profiles, controlled forms,
//!   direct sums, the Schmidt-rank-3 standard form, permutation type systems,
//!   and generators for the fixture families used throughout the test suite.
//! - [`costs`]: closed-form entanglement/classical-communication cost bounds,
//!   Bell numbers, and a recommender mapping an operator to its cheapest
//!   applicable protocol.
//! - [`locc_sim`]: an exact two-party LOCC virtual machine and the six
//!   implementation protocols, each verified branch-by-branch against the
//!   target channel with a full resource ledger.
//! - [`entpower`]: evaluation and numerical maximization of entangling power
//!   over ancilla-assisted product inputs.
//! - [`classical_circ`]: bipartite classical reversible maps, their Schmidt
//!   rank, and synthesis into local gates plus counted nonlocal CNOTs.

pub mod classical_circ;
pub mod core_linalg;
pub mod costs;
pub mod entpower;
pub mod error;
pub mod locc_sim;
pub mod report;
pub mod structure;

pub use error::Error;

/// Default relative tolerance for rank decisions and gauge residuals.
pub const DEFAULT_TOL: f64 = 1e-8;
