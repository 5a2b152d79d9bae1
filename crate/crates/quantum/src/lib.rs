//! Wavepacket propagation of a two-level atom moving along the axis of a
//! focused laser beam.
//!
//! The amplitudes are kept in the interaction picture, where the internal
//! energies drop out and the coupling
//!
//! ```text
//! M(R, t) = M₀ F(R) exp(i [k R − g(R) − Δ t])
//! ```
//!
//! oscillates at the detuning. Both components share the free kinetic term.
//! Time stepping is symmetric Strang splitting: a kinetic half step in
//! momentum space, an exact 2×2 rotation between the components at the
//! midpoint time, and another kinetic half step. Every piece is unitary.

mod error;
mod evolve;
mod grid;
mod state;

pub use error::{Error, Result};
pub use evolve::{evolve, Evolution, EvolveOptions, FilteredForce, ObservableSeries, SmoothedPoint, Snapshot};
pub use grid::SpatialGrid;
pub use state::{init_gaussian_packet, mean_rest_force, observables, Observables, QuantumState};

pub use num_complex::Complex64;
