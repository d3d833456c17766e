//! Structural analysis of bipartite operators: block profiles, controlled
//! forms, direct sums, standard forms for Schmidt rank two and three,
//! permutation type systems, covering subsets, and fixture generators.

mod block;
mod classify;
mod controlled;
mod covering;
mod direct_sum;
pub mod fixtures;
mod rank2;
mod rank3;
pub(crate) mod types;

pub use block::{block_of, block_profile, BlockProfile};
pub use classify::{classify_rank3_permutation, Rank3PermClass, Rank3PermWitness};
pub use controlled::{detect_controlled, ControlledForm, ControlledTerm, LocalGauge, Side};
pub use covering::covering_subsets;
pub use direct_sum::direct_sum_decompose;
pub use rank2::{diagonal_two_phase, rank2_standard_form};
pub use rank3::{rank3_standard_form, Rank3Block, Rank3Form, Rank3StandardForm};
pub use types::{
    loose_type_partition, partial_perms_in_b_span, partial_transpose_check,
    permutation_type_partitions, PermTypeInfo, TypeKind, TypePartition,
};
