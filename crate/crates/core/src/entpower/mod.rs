//! Entangling power: evaluate and maximize the output entanglement of a
//! bipartite unitary over ancilla-assisted product inputs.

mod fixtures;
mod optimize;

pub use fixtures::{fixture_inputs, FixtureCase};
pub use optimize::{maximize, output_entanglement, EntPowerConfig, EntPowerResult, ProductInput};
