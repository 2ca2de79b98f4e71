//! Digital-analog quantum simulation of generalized Dicke models.
//!
//! The crate builds Tavis-Cummings / anti-Tavis-Cummings gate schedules that
//! Trotterize Dicke, biased Dicke and pulsed Dicke Hamiltonians, integrates
//! them under a Lindblad master equation with cavity decay, spontaneous
//! emission and dephasing, and compares the measured digital error with the
//! leading-order commutator estimate and its Cauchy-Schwarz bound.
//!
//! Module map:
//!
//! * [`hilbert`]: truncated qubit ⊗ boson spaces and dense operator algebra.
//! * [`hamiltonians`]: model parameters and every Hamiltonian builder.
//! * [`trotter`]: gate/segment schedules and noiseless execution.
//! * [`lindblad`]: fixed-step RK4 master-equation integration of schedules.
//! * [`error_bounds`]: leading-order digital error and its bounds.
//! * [`observables`]: fidelity, photon number, survival and leakage.
//! * [`config`], [`cli`], [`verify`]: the configuration-driven entry point.

pub mod cli;
pub mod config;
pub mod error;
pub mod error_bounds;
pub mod hamiltonians;
pub mod hilbert;
pub mod lindblad;
pub mod observables;
pub mod trotter;
pub mod verify;

pub use error::{Error, Result};
pub use hilbert::{DensityMatrix, HilbertSpace, Operator, StateVector};
