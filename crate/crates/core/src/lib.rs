//! Minimal-cardinality disturbance decoupling for linearized coupled-oscillator
//! networks and power grids.
//!
//! The crate is organised bottom-up:
//!
//! - [`netgraph`]: node sets, boundaries, invariant-set fixed points and
//!   minimum vertex-cut actuator placement on influence digraphs.
//! - [`oscillator`]: nonlinear oscillator model, phase-locked equilibrium,
//!   linearization and descriptor-form assembly.
//! - [`powergrid`]: grid case files and their conversion to oscillator networks.
//! - [`decouple`]: sensor selection, friend feedback synthesis and verification.
//! - [`sim`]: descriptor simulation under step disturbances and spectral checks.

pub mod decouple;
pub mod error;
pub mod netgraph;
pub mod oscillator;
pub mod powergrid;
pub mod sim;

pub use error::{Error, Result};
pub use netgraph::{InfluenceGraph, NodeSet, Placement};
