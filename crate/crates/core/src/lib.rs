//! Capacity analysis for a star-topology entanglement switch serving `k`
//! users with bipartite (BSM) and tripartite (GHZ) measurements.
//!
//! * [`model`]: configuration, policy and capacity types.
//! * [`ctmc`]: chain construction and stationary solve for buffers of one
//!   and two qubits per link, with optional decoherence.
//! * [`analytic`]: closed forms for the one-qubit buffer.
//! * [`sim`]: discrete-event simulator used as an independent oracle.
//! * [`region`]: policy-grid sweeps, Pareto frontier and TDM comparison.
//! * [`cli`]: the `entswitch` command-line front end.

pub mod analytic;
pub mod cli;
pub mod ctmc;
pub mod error;
pub mod model;
pub mod region;
pub mod sim;
pub mod stats;

pub use error::{Error, Result};
pub use model::{rate_from_slot, validate_config, CapacityPoint, PolicyParams, SwitchConfig};
