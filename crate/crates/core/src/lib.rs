//! Two flux-tunable qubits coupled through a chain of resonators: spectra,
//! photon-mediated dynamics, a controlled-phase gate and state tomography.

// `!(x > 0.0)` is used on purpose so NaN fails validation.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod acceptance;
pub mod artifacts;
pub mod config;
pub mod coupling;
pub mod device;
pub mod dynamics;
pub mod error;
pub mod gates;
pub mod hamiltonian;
pub mod linalg;
pub mod optimize;
pub mod propagate;
pub mod schedule;
pub mod spectroscopy;
pub mod state;
pub mod tomography;
pub mod transmon;
