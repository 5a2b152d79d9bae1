//! Axial optical forces on a two-level atom travelling along a focused
//! Gaussian laser beam.
//!
//! The crate covers three pictures of the same system:
//!
//! * the naive classical picture, where the atom moves in the light-shift
//!   potential `U = |M|²/ħΔ'` with the detuning `Δ'` Doppler-shifted by the
//!   atom's instantaneous velocity ([`forces::Interaction::dipole_force`],
//!   [`classical`]);
//! * the Heisenberg-picture oscillator model, where the induced dipole is
//!   solved for explicitly and the force splits into an intensity-gradient
//!   term and a phase-gradient term whose velocity dependences cancel
//!   ([`forces::Interaction::analytic_force_breakdown`]);
//! * an ensemble "demon" experiment that measures the transmission asymmetry
//!   of thermal atoms through the focus under either force model ([`demon`]).
//!
//! Wavepacket propagation lives in the `optoforce-quantum` crate because it
//! needs an FFT; everything here is `no_std` and only requires `alloc`.
//!
//! All quantities are SI. Angular frequencies are in rad/s.

#![no_std]

extern crate alloc;
#[cfg(test)]
extern crate std;

pub mod beam;
pub mod classical;
pub mod constants;
pub mod demon;
mod error;
pub mod forces;
pub mod math;
pub mod ode;

pub use beam::BeamConfig;
pub use error::{Error, Result};
pub use forces::{AtomConfig, Interaction};

pub use num_complex::Complex64;
