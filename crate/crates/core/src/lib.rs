//! Benchmark of a diagonalized deep-QAOA statevector simulation against
//! simulated annealing on DC power-flow unit commitment.
//!
//! The pipeline: parse a grid ([`grid`]), draw a [`grid::Scenario`], solve the
//! DC power flow for every generator commitment ([`powerflow`]) into a
//! min/max-normalized [`cost_table::CostTable`], then run [`qaoa`] and [`sa`]
//! over that table and score them with [`metrics`]. [`bench`] sweeps the
//! whole experiment grid.

pub mod bench;
pub mod cost_table;
pub mod grid;
pub mod metrics;
pub mod powerflow;
pub mod qaoa;
pub mod rng;
pub mod sa;
