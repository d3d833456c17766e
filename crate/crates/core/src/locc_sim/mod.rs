//! Exact two-party LOCC virtual machine and implementations of the six
//! protocols, each verified branch-by-branch against the target channel with
//! a full resource ledger.

mod controlled;
mod group;
mod ptl2;
mod ptl3;
mod trace;
mod two_level;
pub mod vm;

pub use controlled::{
    pad_with_zero_terms, run_basic_controlled, run_basic_controlled_with, run_controlled_auto,
    ControlledRunOptions,
};
pub use group::{
    dihedral_representation, klein_from_ops, pauli_group, run_group_type,
    solve_group_expansion, GroupSpec,
};
pub use ptl2::run_permutation_ptl2;
pub use ptl3::run_permutation_ptl3;
pub use trace::{verify_channel, ChannelVerdict, ProtocolTrace};
pub use two_level::{
    decompose_from_pieces, decompose_two_level, lower_form_of, run_two_level, LowerForm,
    TwoLevelDecomposition, TwoLevelTerm,
};
pub use vm::{Basis, Branch, Event, Ledger, Mode, Party, RegId, Role};
