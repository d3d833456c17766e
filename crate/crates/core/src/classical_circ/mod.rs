//! Bipartite classical reversible maps: Schmidt rank, synthesis into local
//! reversible gates plus counted nonlocal CNOTs, and exhaustive replay
//! verification.

mod map;
mod synth;

pub use map::ReversibleMap;
pub use synth::{classical_schmidt_rank, replay, synthesize, AncillaRegime, CnotSynthesis, Gate, Owner, Wire};
