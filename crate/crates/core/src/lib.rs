//! Simulation of dipolar-coupled spin-1/2 clusters under dynamical-decoupling
//! pulse trains.
//!
//! The crate covers the full multiple-quantum (MQ) spin-counting protocol:
//! two-quantum excitation with the 8-pulse cycle, storage under CPMG, UDD or
//! RUDD decoupling with classical dephasing noise, time-reversed mixing and
//! phase-encoded readout of the coherence-order spectrum. A filter-function
//! layer gives analytic decay predictions for single-spin dephasing that the
//! Monte-Carlo propagator is checked against.
//!
//! Conventions shared by every module:
//!
//! * Basis states are products of `|↑⟩` (index bit 0, `m = +1/2`) and `|↓⟩`
//!   (bit 1). Spin 0 is the most significant bit.
//! * Rotations are `exp(-i θ (cos φ I_x + sin φ I_y))`, so a `(π/2)_y` pulse
//!   takes `I_z` to `I_x`.
//! * States are traceless deviation density matrices.
//! * All times are seconds and all frequencies are angular (rad/s) unless a
//!   name says otherwise.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod config;
pub mod error;
pub mod experiment;
pub mod filter;
pub mod hamiltonian;
pub mod linalg;
pub mod noise;
pub mod propagate;
pub mod quadrature;
pub mod sequence;
pub mod spin;

pub use error::{Error, Result};
pub use linalg::{CMatrix, C64};
pub use spin::{Axis, CoherenceSpectrum, Operator, SpinSystem, State};
