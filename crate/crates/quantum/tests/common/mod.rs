#![allow(dead_code)]

use std::f64::consts::TAU;

use optoforce_core::constants::{ELECTRON_MASS, ELEMENTARY_CHARGE, HBAR};
use optoforce_core::{AtomConfig, BeamConfig, Interaction};
use optoforce_quantum::{EvolveOptions, SpatialGrid};

pub const MASS: f64 = 3.3e-31;
pub const DETUNING: f64 = TAU * 5e9;
pub const RAYLEIGH: f64 = 20e-6;
pub const START: f64 = 40e-6;
pub const SPEED: f64 = 2000.0;
pub const SIGMA: f64 = 5e-6;

/// L = 20 µm with M₀/ħΔ = 1/5 and δω_D/Δ = 0.2.
pub fn desk_interaction(coupling_over_hbar_delta: f64) -> Interaction {
    let beam = BeamConfig::new(2e-6, RAYLEIGH, 1e15).unwrap();
    let atom = AtomConfig {
        mass: MASS,
        transition_frequency: 1e15 - DETUNING,
        coupling: coupling_over_hbar_delta * HBAR * DETUNING,
        lifetime: 1e-8,
        electron_mass: ELECTRON_MASS,
        electron_charge: -ELEMENTARY_CHARGE,
    };
    Interaction::new(atom, beam, DETUNING).unwrap()
}

pub fn desk_grid() -> SpatialGrid {
    SpatialGrid::new(-160e-6, 160e-6, 8192).unwrap()
}

/// A hundred steps per detuning period, recording every fourth.
pub fn desk_options(t_end: f64) -> EvolveOptions {
    EvolveOptions::new(TAU / DETUNING / 100.0, t_end, 4)
}
