//! Thermal-beam "demon" experiment: atoms from two chambers cross the focus
//! and we count who gets through.
//!
//! Each atom is an independent classical trajectory. Its speed is drawn from
//! the flux-weighted 1-D Maxwell distribution, `p(v) ∝ v exp(−mv²/2k_BT)`,
//! which makes its kinetic energy exponentially distributed with mean k_BT.
//! Every atom owns a ChaCha8 substream keyed by `(side, index)`, so results do
//! not depend on the order in which atoms are simulated.

use alloc::vec::Vec;

use rand_chacha::ChaCha8Rng;
use rand_core::{RngCore, SeedableRng};

use crate::classical::{self, ForceModel, Side, SweepOptions};
use crate::constants::BOLTZMANN;
use crate::error::{Error, Result};
use crate::forces::Interaction;
use crate::math;

/// Largest tolerated fraction of invalid atoms.
pub const MAX_INVALID_FRACTION: f64 = 0.01;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EnsembleConfig {
    /// K.
    pub temperature: f64,
    /// Atoms launched from each side.
    pub n_atoms: usize,
    pub rng_seed: u64,
    pub force_model: ForceModel,
    /// Optional `(min, max)` kinetic-energy bounds (J) for the sampled atoms.
    pub energy_window: Option<(f64, f64)>,
    pub rel_tol: f64,
    pub freeze_doppler: bool,
}

impl EnsembleConfig {
    pub fn new(temperature: f64, n_atoms: usize, rng_seed: u64, force_model: ForceModel) -> Self {
        EnsembleConfig {
            temperature,
            n_atoms,
            rng_seed,
            force_model,
            energy_window: None,
            rel_tol: 1e-9,
            freeze_doppler: false,
        }
    }

    pub fn validate(&self) -> Result<()> {
        Error::check_positive("ensemble.temperature", self.temperature)?;
        if self.n_atoms == 0 {
            return Err(Error::InvalidParameter {
                name: "ensemble.n_atoms",
                constraint: ">= 1",
                value: 0.0,
            });
        }
        if let Some((lo, hi)) = self.energy_window {
            if !(lo.is_finite() && lo >= 0.0) {
                return Err(Error::InvalidParameter {
                    name: "ensemble.energy_window.min",
                    constraint: "finite and >= 0",
                    value: lo,
                });
            }
            if hi.is_nan() || hi <= lo {
                return Err(Error::InvalidParameter {
                    name: "ensemble.energy_window.max",
                    constraint: "> energy_window.min",
                    value: hi,
                });
            }
        }
        Ok(())
    }

    fn thermal_energy(&self) -> f64 {
        BOLTZMANN * self.temperature
    }
}

fn atom_rng(seed: u64, side: Side, index: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let tag: u64 = match side {
        Side::Left => 0,
        Side::Right => 1,
    };
    rng.set_stream((tag << 40) | index as u64);
    rng
}

/// Kinetic energy of atom `index` on `side` (J).
pub fn sample_kinetic_energy(cfg: &EnsembleConfig, side: Side, index: usize) -> f64 {
    let kt = cfg.thermal_energy();
    let (lo, hi) = cfg.energy_window.unwrap_or((0.0, f64::INFINITY));
    // w uniform on [0, 1); inverse CDF of the exponential truncated to [lo, hi)
    let w = (atom_rng(cfg.rng_seed, side, index).next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64);
    let ke = lo - kt * math::ln_1p(w * math::exp_m1(-(hi - lo) / kt));
    ke.clamp(lo, hi)
}

/// Speeds (m/s) of all atoms on one side, in index order.
pub fn sample_velocities(cfg: &EnsembleConfig, mass: f64, side: Side) -> Vec<f64> {
    (0..cfg.n_atoms)
        .map(|i| math::sqrt(2.0 * sample_kinetic_energy(cfg, side, i) / mass))
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Outcome {
    Passed,
    Reflected,
    /// Trajectory hit resonance, failed to converge or never left the beam.
    Invalid,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AtomRecord {
    pub side: Side,
    pub index: usize,
    /// Signed launch velocity (m/s).
    pub initial_velocity: f64,
    pub outcome: Outcome,
    /// J; zero for invalid atoms.
    pub delta_kinetic_energy: f64,
}

/// Launch one atom and classify it.
pub fn simulate_atom(cfg: &EnsembleConfig, it: &Interaction, side: Side, index: usize) -> Result<AtomRecord> {
    let ke = sample_kinetic_energy(cfg, side, index);
    let speed = math::sqrt(2.0 * ke / it.atom.mass);
    let opts = SweepOptions {
        rel_tol: cfg.rel_tol,
        samples_per_step: 1,
        freeze_doppler: cfg.freeze_doppler,
        ..SweepOptions::default()
    };
    let mut rec = AtomRecord {
        side,
        index,
        initial_velocity: side.sign() * speed,
        outcome: Outcome::Invalid,
        delta_kinetic_energy: 0.0,
    };
    match classical::sweep_trajectory(it, cfg.force_model, ke, side, &opts) {
        Ok(o) => {
            rec.outcome = if o.exit == classical::Exit::TimeLimit {
                Outcome::Invalid
            } else if o.reflected() {
                Outcome::Reflected
            } else {
                Outcome::Passed
            };
            if rec.outcome != Outcome::Invalid {
                rec.delta_kinetic_energy = o.delta_kinetic_energy;
            }
            Ok(rec)
        }
        Err(Error::NearResonance { .. } | Error::StepFailure { .. } | Error::StepLimit { .. }) => Ok(rec),
        Err(e) => Err(e),
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EnsembleReport {
    pub n_atoms: usize,
    pub n_left_to_right_passed: usize,
    pub n_right_to_left_passed: usize,
    pub n_reflected_left: usize,
    pub n_reflected_right: usize,
    pub n_invalid: usize,
    /// T_{R→L} − T_{L→R} over valid atoms.
    pub asymmetry: f64,
    /// Pooled two-proportion z statistic of the asymmetry.
    pub z_score: f64,
    /// Configuration entropy change from an equal split (J/K).
    pub delta_entropy: f64,
    pub records: Vec<AtomRecord>,
}

impl EnsembleReport {
    /// Aggregate per-atom records; their order does not matter.
    pub fn from_records(n_atoms: usize, records: Vec<AtomRecord>) -> Result<Self> {
        let mut r = EnsembleReport {
            n_atoms,
            n_left_to_right_passed: 0,
            n_right_to_left_passed: 0,
            n_reflected_left: 0,
            n_reflected_right: 0,
            n_invalid: 0,
            asymmetry: 0.0,
            z_score: 0.0,
            delta_entropy: 0.0,
            records,
        };
        for rec in &r.records {
            match (rec.side, rec.outcome) {
                (_, Outcome::Invalid) => r.n_invalid += 1,
                (Side::Left, Outcome::Passed) => r.n_left_to_right_passed += 1,
                (Side::Left, Outcome::Reflected) => r.n_reflected_left += 1,
                (Side::Right, Outcome::Passed) => r.n_right_to_left_passed += 1,
                (Side::Right, Outcome::Reflected) => r.n_reflected_right += 1,
            }
        }
        let total = 2 * n_atoms;
        if r.n_invalid as f64 > MAX_INVALID_FRACTION * total as f64 {
            return Err(Error::TooManyInvalid {
                invalid: r.n_invalid,
                total,
            });
        }
        let n_left = (r.n_left_to_right_passed + r.n_reflected_left) as f64;
        let n_right = (r.n_right_to_left_passed + r.n_reflected_right) as f64;
        if n_left > 0.0 && n_right > 0.0 {
            let t_lr = r.n_left_to_right_passed as f64 / n_left;
            let t_rl = r.n_right_to_left_passed as f64 / n_right;
            r.asymmetry = t_rl - t_lr;
            let pooled = (r.n_left_to_right_passed + r.n_right_to_left_passed) as f64 / (n_left + n_right);
            let se = math::sqrt(pooled * (1.0 - pooled) * (1.0 / n_left + 1.0 / n_right));
            r.z_score = if se > 0.0 { r.asymmetry / se } else { 0.0 };
        }
        r.delta_entropy = entropy_delta(&r, n_atoms);
        Ok(r)
    }

    /// Atoms in the left and right chambers after the run.
    pub fn final_counts(&self) -> (usize, usize) {
        (
            self.n_reflected_left + self.n_right_to_left_passed,
            self.n_reflected_right + self.n_left_to_right_passed,
        )
    }

    /// Net flow into the left chamber lowered the configuration entropy.
    pub fn apparent_second_law_violation(&self) -> bool {
        self.delta_entropy < 0.0
    }
}

/// −N k_B Σ p ln p for a two-chamber occupation, with 0 ln 0 = 0.
pub fn configuration_entropy(n_left: usize, n_right: usize) -> f64 {
    let n = (n_left + n_right) as f64;
    if n == 0.0 {
        return 0.0;
    }
    let term = |k: usize| {
        if k == 0 {
            0.0
        } else {
            let p = k as f64 / n;
            p * math::ln(p)
        }
    };
    -n * BOLTZMANN * (term(n_left) + term(n_right))
}

/// S_final − S_initial, starting from `n_initial_per_side` atoms in each
/// chamber (J/K).
pub fn entropy_delta(report: &EnsembleReport, n_initial_per_side: usize) -> f64 {
    let (l, r) = report.final_counts();
    configuration_entropy(l, r) - configuration_entropy(n_initial_per_side, n_initial_per_side)
}

/// Run the whole ensemble on the current thread.
pub fn ensemble_transmission(cfg: &EnsembleConfig, it: &Interaction) -> Result<EnsembleReport> {
    cfg.validate()?;
    let mut records = Vec::with_capacity(2 * cfg.n_atoms);
    for side in [Side::Left, Side::Right] {
        for i in 0..cfg.n_atoms {
            records.push(simulate_atom(cfg, it, side, i)?);
        }
    }
    EnsembleReport::from_records(cfg.n_atoms, records)
}
