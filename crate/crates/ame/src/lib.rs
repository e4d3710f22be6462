//! Simulator for adiabatic Markovian master equations: a time-dependent
//! transverse-field Ising chain weakly coupled to a thermal Ohmic boson bath,
//! evolved in the instantaneous energy eigenbasis with either a Lindblad-form
//! (rotating-wave) generator or the double-sided non-RWA generator.
//!
//! Units: hbar = k_B = 1, energies in GHz, times in ns (GHz = 1/ns).

pub mod analysis;
pub mod bath;
pub mod config;
pub mod error;
pub mod generators;
pub mod integrator;
pub mod model;
pub mod operators;
pub mod quad;
pub mod runner;
pub mod util;

pub use error::{Error, Result};
