//! Light-shift potential, dipole force and the Heisenberg-picture force on an
//! atom moving along the beam axis.
//!
//! Two parameterisations of the coupling coexist. The two-level models use
//! the peak matrix element `M₀` directly (`M(R) = M₀ F(R)`); the oscillator
//! model uses the field amplitude `E₀` together with the electron charge,
//! reduced mass and transition frequency. They are tied together by
//!
//! ```text
//! M₀ = |q| · y₀₁ · E₀ / 2,     y₀₁ = √(ħ / 2 m_e ω_A)
//! ```
//!
//! (the ground-to-first-excited matrix element of the oscillator coordinate),
//! under which `−∂U/∂R` for an atom at rest equals the oscillator force.
//!
//! In the oscillator model the laser frequency is taken to be `ω_A + Δ`.

use num_complex::Complex64;

use crate::beam::BeamConfig;
use crate::constants::HBAR;
use crate::error::{Error, Result};
use crate::math;

/// Default half-width of the forbidden band around resonance (rad/s).
pub const DEFAULT_GUARD_BAND: f64 = 1.0e3;
/// Default excited-state population above which the perturbative flag drops.
pub const DEFAULT_PERTURBATIVE_BOUND: f64 = 0.25;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AtomConfig {
    /// Total atomic mass m (kg).
    pub mass: f64,
    /// Transition angular frequency ω_A (rad/s).
    pub transition_frequency: f64,
    /// Peak coupling matrix element M₀ at the focus (J).
    pub coupling: f64,
    /// Radiative lifetime τ (s).
    pub lifetime: f64,
    /// Reduced electron mass m_e (kg) for the oscillator model.
    pub electron_mass: f64,
    /// Electron charge q (C). Only q² and |q| enter the forces.
    pub electron_charge: f64,
}

impl AtomConfig {
    pub fn validate(&self) -> Result<()> {
        Error::check_positive("atom.mass", self.mass)?;
        Error::check_positive("atom.transition_frequency", self.transition_frequency)?;
        Error::check_positive("atom.lifetime", self.lifetime)?;
        Error::check_positive("atom.electron_mass", self.electron_mass)?;
        Error::check_finite("atom.coupling", self.coupling)?;
        Error::check_finite("atom.electron_charge", self.electron_charge)?;
        if self.coupling < 0.0 {
            return Err(Error::InvalidParameter {
                name: "atom.coupling",
                constraint: ">= 0",
                value: self.coupling,
            });
        }
        Ok(())
    }

    /// Oscillator spring constant k_s = m_e ω_A².
    pub fn spring_constant(&self) -> f64 {
        self.electron_mass * self.transition_frequency * self.transition_frequency
    }

    /// y₀₁ = √(ħ / 2 m_e ω_A).
    pub fn oscillator_matrix_element(&self) -> f64 {
        math::sqrt(HBAR / (2.0 * self.electron_mass * self.transition_frequency))
    }

    /// M₀ produced by a field of peak amplitude `e0`.
    pub fn coupling_for_field(&self, e0: f64) -> f64 {
        0.5 * self.electron_charge.abs() * self.oscillator_matrix_element() * e0
    }

    /// Field amplitude E₀ that produces the coupling `m0`.
    pub fn field_for_coupling(&self, m0: f64) -> f64 {
        2.0 * m0 / (self.electron_charge.abs() * self.oscillator_matrix_element())
    }
}

/// Doppler shift δω_D = −2πv/λ = −k v of the laser frequency seen by an atom
/// moving with velocity `v` along the beam.
#[inline]
pub fn doppler_shift(v: f64, beam: &BeamConfig) -> f64 {
    -beam.wavevector() * v
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DetuningReport {
    /// Δ = ω_L − ω_A for an atom at rest (rad/s).
    pub static_detuning: f64,
    /// δω_D (rad/s).
    pub doppler_shift: f64,
    /// Δ' = Δ + δω_D (rad/s).
    pub effective_detuning: f64,
    /// δω_D / Δ.
    pub doppler_fraction: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ExcitedPopulation {
    /// P_E = |M/ħΔ'|².
    pub probability: f64,
    /// Photon scattering rate P_E/τ (1/s).
    pub scattering_rate: f64,
    /// False when P_E exceeds the configured perturbative bound.
    pub perturbative: bool,
}

impl ExcitedPopulation {
    /// Expected number of scattered photons over `transit_time`.
    pub fn expected_scattered_photons(&self, transit_time: f64) -> f64 {
        self.scattering_rate * transit_time
    }
}

/// Expansion order for the induced-dipole coefficients.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Order {
    /// Solve the 2×2 linear system exactly.
    Exact,
    /// First order in (δω_D + i F'V₀/F)/Δ, near-resonant denominator.
    FirstOrder,
}

/// Coefficients of the driven-oscillator ansatz
/// `y = a F e^{iφ}`, `p = b F e^{iφ}`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HeisenbergCoefficients {
    /// Displacement amplitude a (m).
    pub a: Complex64,
    /// Momentum amplitude b (kg·m/s).
    pub b: Complex64,
    /// Complex drive frequency ω̃ = ω' + i (F'/F) V₀ (rad/s).
    pub omega_tilde: Complex64,
    pub order: Order,
}

/// Time-averaged axial force from the oscillator model, split by origin.
///
/// `gradient_term` comes from the envelope derivative F'/F in ∂E/∂R and is
/// the usual intensity-gradient dipole force; `phase_term` comes from the
/// `ik` factor. All values in newtons.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ForceBreakdown {
    pub gradient_term: f64,
    pub phase_term: f64,
    pub total: f64,
    /// Force on the same atom at rest.
    pub velocity_independent_part: f64,
    /// Linear-in-V₀ part of `total`.
    pub first_order_velocity_part: f64,
    /// Linear-in-V₀ part of `gradient_term`.
    pub gradient_velocity_part: f64,
    /// Linear-in-V₀ part of `phase_term`.
    pub phase_velocity_part: f64,
    /// Everything beyond linear order: total − rest − linear.
    pub residual_higher_order: f64,
}

/// How the field is held while the detuning is swept.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum ResidualConvention {
    /// Keep E₀ (and hence M₀) fixed.
    #[default]
    FixedField,
    /// Keep M₀/ħΔ fixed, rescaling E₀ with Δ.
    FixedCouplingRatio,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ResidualScaling {
    pub detunings: alloc::vec::Vec<f64>,
    pub residuals: alloc::vec::Vec<f64>,
    /// Fitted exponent p in |residual| ∝ Δ^p.
    pub exponent: f64,
}

/// An atom in a beam at a fixed laser detuning.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Interaction {
    pub atom: AtomConfig,
    pub beam: BeamConfig,
    /// Static detuning Δ = ω_L − ω_A (rad/s).
    pub detuning: f64,
    pub guard_band: f64,
    pub perturbative_bound: f64,
}

impl Interaction {
    pub fn new(atom: AtomConfig, beam: BeamConfig, detuning: f64) -> Result<Self> {
        atom.validate()?;
        beam.validate()?;
        Error::check_finite("detuning", detuning)?;
        let it = Interaction {
            atom,
            beam,
            detuning,
            guard_band: DEFAULT_GUARD_BAND,
            perturbative_bound: DEFAULT_PERTURBATIVE_BOUND,
        };
        it.guard(detuning)?;
        Ok(it)
    }

    pub fn with_guard_band(mut self, guard_band: f64) -> Self {
        self.guard_band = guard_band;
        self
    }

    pub fn with_perturbative_bound(mut self, bound: f64) -> Self {
        self.perturbative_bound = bound;
        self
    }

    pub fn with_coupling(mut self, coupling: f64) -> Self {
        self.atom.coupling = coupling;
        self
    }

    fn guard(&self, detuning: f64) -> Result<()> {
        if detuning.abs() > self.guard_band {
            Ok(())
        } else {
            Err(Error::NearResonance {
                detuning,
                guard_band: self.guard_band,
            })
        }
    }

    /// Δ' = Δ + δω_D for an atom moving at `v`.
    pub fn effective_detuning(&self, v: f64) -> Result<DetuningReport> {
        let doppler = doppler_shift(v, &self.beam);
        let effective = self.detuning + doppler;
        self.guard(effective)?;
        Ok(DetuningReport {
            static_detuning: self.detuning,
            doppler_shift: doppler,
            effective_detuning: effective,
            doppler_fraction: doppler / self.detuning,
        })
    }

    /// Peak light shift U(0) = M₀²/ħΔ for an atom at rest (J).
    pub fn barrier_height(&self) -> f64 {
        self.atom.coupling * self.atom.coupling / (HBAR * self.detuning)
    }

    /// U(R, v) = |M₀F(R)|² / ħΔ'(v).
    pub fn effective_potential(&self, r: f64, v: f64) -> Result<f64> {
        let dp = self.effective_detuning(v)?.effective_detuning;
        let m = self.atom.coupling * self.beam.envelope(r);
        Ok(m * m / (HBAR * dp))
    }

    /// −∂U/∂R at fixed velocity.
    pub fn dipole_force(&self, r: f64, v: f64) -> Result<f64> {
        let dp = self.effective_detuning(v)?.effective_detuning;
        let m0 = self.atom.coupling;
        let f = self.beam.envelope(r);
        Ok(-(m0 * m0 / (HBAR * dp)) * 2.0 * f * self.beam.envelope_derivative(r))
    }

    pub fn excited_population(&self, r: f64, v: f64) -> Result<ExcitedPopulation> {
        let dp = self.effective_detuning(v)?.effective_detuning;
        let x = self.atom.coupling * self.beam.envelope(r) / (HBAR * dp);
        let probability = x * x;
        Ok(ExcitedPopulation {
            probability,
            scattering_rate: probability / self.atom.lifetime,
            perturbative: probability <= self.perturbative_bound,
        })
    }

    /// E₀ used by the oscillator model: the configured beam amplitude, or the
    /// amplitude that reproduces `atom.coupling`.
    pub fn field_amplitude(&self) -> f64 {
        self.beam
            .field_amplitude
            .unwrap_or_else(|| self.atom.field_for_coupling(self.atom.coupling))
    }

    /// ε = ω̃ − ω_A = Δ − k V₀ + i (F'/F) V₀, built without forming ω̃².
    fn drive_offset(&self, r0: f64, v0: f64) -> Complex64 {
        let k = self.beam.local_wavevector(r0);
        let rho = self.beam.log_envelope_derivative(r0);
        Complex64::new(-k * v0, rho * v0) + self.detuning
    }

    fn coefficient_a(&self, eps: Complex64, order: Order) -> Complex64 {
        let q = self.atom.electron_charge;
        let e0 = self.field_amplitude();
        let me = self.atom.electron_mass;
        let wa = self.atom.transition_frequency;
        match order {
            // ω̃² − ω_A² = ε (2ω_A + ε)
            Order::Exact => -q * e0 / (2.0 * me * (eps * (eps + 2.0 * wa))),
            Order::FirstOrder => {
                let delta = self.detuning;
                let a0 = -q * e0 / (4.0 * wa * me * delta);
                a0 * (1.0 - (eps - delta) / delta)
            }
        }
    }

    /// da/dε at the rest value ε = Δ.
    fn coefficient_slope(&self, order: Order) -> f64 {
        let q = self.atom.electron_charge;
        let e0 = self.field_amplitude();
        let me = self.atom.electron_mass;
        let wa = self.atom.transition_frequency;
        let delta = self.detuning;
        match order {
            Order::Exact => {
                let d = delta * (delta + 2.0 * wa);
                q * e0 * (2.0 * wa + 2.0 * delta) / (2.0 * me * d * d)
            }
            Order::FirstOrder => q * e0 / (4.0 * wa * me * delta * delta),
        }
    }

    pub fn heisenberg_coefficients(
        &self,
        r0: f64,
        v0: f64,
        order: Order,
    ) -> Result<HeisenbergCoefficients> {
        let eps = self.drive_offset(r0, v0);
        if eps.norm() <= self.guard_band {
            return Err(Error::NearResonance {
                detuning: eps.norm(),
                guard_band: self.guard_band,
            });
        }
        let omega_tilde = eps + self.atom.transition_frequency;
        let a = self.coefficient_a(eps, order);
        // first row of the driven-oscillator system: b/m_e + i ω̃ a = 0
        let b = -Complex64::i() * omega_tilde * self.atom.electron_mass * a;
        Ok(HeisenbergCoefficients {
            a,
            b,
            omega_tilde,
            order,
        })
    }

    /// Cycle-averaged q⟨(y + y*) ∂E/∂R⟩ at (R₀, V₀), split into its
    /// intensity-gradient and phase-gradient parts.
    ///
    /// The e^{±2iω't} cross terms average to zero and are dropped; each
    /// surviving term is added to its conjugate, so everything returned is
    /// real.
    pub fn analytic_force_breakdown(&self, r0: f64, v0: f64, order: Order) -> Result<ForceBreakdown> {
        let coeffs = self.heisenberg_coefficients(r0, v0, order)?;
        let f = self.beam.envelope(r0);
        let rho = self.beam.log_envelope_derivative(r0);
        let k = self.beam.local_wavevector(r0);
        let scale = self.atom.electron_charge * self.field_amplitude() * f * f;

        // 2 Re[(q E₀ F²/2) a* X] for X = ρ and X = i k
        let gradient = |a: Complex64| scale * rho * a.re;
        let phase = |a: Complex64| scale * k * a.im;

        let a_rest = self.coefficient_a(Complex64::new(self.detuning, 0.0), order);
        let a_linear = self.coefficient_slope(order) * (self.drive_offset(r0, v0) - self.detuning);

        let gradient_term = gradient(coeffs.a);
        let phase_term = phase(coeffs.a);
        let total = gradient_term + phase_term;
        let velocity_independent_part = gradient(a_rest) + phase(a_rest);
        let gradient_velocity_part = gradient(a_linear);
        let phase_velocity_part = phase(a_linear);
        let first_order_velocity_part = gradient_velocity_part + phase_velocity_part;
        Ok(ForceBreakdown {
            gradient_term,
            phase_term,
            total,
            velocity_independent_part,
            first_order_velocity_part,
            gradient_velocity_part,
            phase_velocity_part,
            residual_higher_order: total - velocity_independent_part - first_order_velocity_part,
        })
    }

    /// Velocity-independent closed form −q²E₀²/(4ω_A m_e) · (F/Δ) · dF/dR.
    pub fn rest_force(&self, r: f64) -> f64 {
        let q = self.atom.electron_charge;
        let e0 = self.field_amplitude();
        -(q * q * e0 * e0) / (4.0 * self.atom.transition_frequency * self.atom.electron_mass)
            * (self.beam.envelope(r) / self.detuning)
            * self.beam.envelope_derivative(r)
    }

    /// total_exact(V₀) − total_exact(0).
    pub fn velocity_dependence_residual(&self, r0: f64, v0: f64) -> Result<f64> {
        let moving = self.analytic_force_breakdown(r0, v0, Order::Exact)?.total;
        let rest = self.analytic_force_breakdown(r0, 0.0, Order::Exact)?.total;
        Ok(moving - rest)
    }

    /// The same atom and field at another detuning, keeping ω_A fixed.
    pub fn retuned(&self, detuning: f64, convention: ResidualConvention) -> Result<Interaction> {
        let mut next = *self;
        next.detuning = detuning;
        match convention {
            ResidualConvention::FixedField => {
                let e0 = self.field_amplitude();
                next.beam.field_amplitude = Some(e0);
                next.atom.coupling = self.atom.coupling_for_field(e0);
            }
            ResidualConvention::FixedCouplingRatio => {
                let ratio = self.atom.coupling / (HBAR * self.detuning);
                next.atom.coupling = ratio * HBAR * detuning;
                next.beam.field_amplitude = None;
            }
        }
        next.guard(detuning)?;
        Ok(next)
    }

    /// Sweeps Δ over `detunings` and fits the power law of the exact-order
    /// velocity-dependent residual at (R₀, V₀).
    pub fn residual_scaling(
        &self,
        r0: f64,
        v0: f64,
        detunings: &[f64],
        convention: ResidualConvention,
    ) -> Result<ResidualScaling> {
        let mut residuals = alloc::vec::Vec::with_capacity(detunings.len());
        for &d in detunings {
            residuals.push(self.retuned(d, convention)?.velocity_dependence_residual(r0, v0)?);
        }
        let lx: alloc::vec::Vec<f64> = detunings.iter().map(|d| math::ln(d.abs())).collect();
        let ly: alloc::vec::Vec<f64> = residuals.iter().map(|r| math::ln(r.abs())).collect();
        let (exponent, _) = math::linear_fit(&lx, &ly).ok_or(Error::InvalidParameter {
            name: "detunings",
            constraint: "at least two distinct values",
            value: detunings.len() as f64,
        })?;
        Ok(ResidualScaling {
            detunings: detunings.to_vec(),
            residuals,
            exponent,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::constants::{ELECTRON_MASS, ELEMENTARY_CHARGE, SPEED_OF_LIGHT};
    use core::f64::consts::TAU;
    use proptest::prelude::*;

    const DELTA: f64 = TAU * 5.0e9;

    fn reference() -> Interaction {
        let omega_l = TAU * SPEED_OF_LIGHT / 2e-6;
        let beam = BeamConfig::new(2e-6, 100e-6, omega_l).unwrap();
        let atom = AtomConfig {
            mass: 3.3e-31,
            transition_frequency: omega_l - DELTA,
            coupling: HBAR * DELTA / 5.0,
            lifetime: 1.0e-3,
            electron_mass: ELECTRON_MASS,
            electron_charge: ELEMENTARY_CHARGE,
        };
        Interaction::new(atom, beam, DELTA).unwrap()
    }

    #[test]
    fn doppler_shift_reference_values() {
        let it = reference();
        let d = doppler_shift(2000.0, &it.beam);
        assert!((d + TAU * 1.0e9).abs() <= 1e-12 * TAU * 1.0e9);
        assert_eq!(doppler_shift(0.0, &it.beam), 0.0);
        assert_eq!(doppler_shift(-1234.5, &it.beam), -doppler_shift(1234.5, &it.beam));
    }

    #[test]
    fn effective_detuning_reference_values() {
        let it = reference();
        let r = it.effective_detuning(2000.0).unwrap();
        assert!((r.effective_detuning - TAU * 4.0e9).abs() < 1e-12 * DELTA);
        assert!((r.doppler_fraction + 0.2).abs() < 1e-12);
        assert_eq!(r.effective_detuning, r.static_detuning + r.doppler_shift);
        assert_eq!(it.effective_detuning(0.0).unwrap().effective_detuning, DELTA);
        let back = it.effective_detuning(-2000.0).unwrap();
        assert!((back.effective_detuning - TAU * 6.0e9).abs() < 1e-12 * DELTA);
    }

    #[test]
    fn near_resonance_is_rejected() {
        let it = reference();
        // k v = Δ at v = Δ λ / 2π = 10 km/s
        let v = DELTA / it.beam.wavevector();
        assert!(matches!(
            it.effective_detuning(v),
            Err(Error::NearResonance { .. })
        ));
        assert!(it.effective_potential(0.0, v).is_err());
        assert!(it.dipole_force(1e-5, v).is_err());
        assert!(it.excited_population(0.0, v).is_err());
        assert!(it.effective_detuning(v * (1.0 - 1e-6)).is_ok());
    }

    #[test]
    fn potential_reference_values() {
        let it = reference();
        let u0 = it.effective_potential(0.0, 0.0).unwrap();
        // M₀ = ħΔ/5 gives U = ħΔ/25
        let expected = HBAR * DELTA / 25.0;
        assert!((u0 - expected).abs() <= 1e-12 * expected);
        assert!((u0 - 1.325e-25).abs() < 0.001e-25);
        let ul = it.effective_potential(it.beam.rayleigh_length, 0.0).unwrap();
        assert!((ul - u0 / 2.0).abs() <= 1e-12 * u0);
        assert!(it.effective_potential(1.0, 0.0).unwrap() < 1e-8 * u0);
    }

    #[test]
    fn excited_population_reference_values() {
        let it = reference();
        let p = it.excited_population(0.0, 0.0).unwrap();
        assert!((p.probability - 0.04).abs() <= 1e-12);
        assert!(p.perturbative);
        assert!((p.scattering_rate - 0.04 / it.atom.lifetime).abs() < 1e-9);
        assert!((p.expected_scattered_photons(300e-9) - 0.04 * 300e-9 / 1e-3).abs() < 1e-15);
        assert!(it.excited_population(1.0, 0.0).unwrap().probability < 1e-9);

        // halving Δ' quadruples P_E
        let half = Interaction::new(it.atom, it.beam, DELTA / 2.0).unwrap();
        let ratio = half.excited_population(3e-5, 0.0).unwrap().probability
            / it.excited_population(3e-5, 0.0).unwrap().probability;
        assert!((ratio - 4.0).abs() < 1e-12);

        let strong = it.with_coupling(HBAR * DELTA);
        assert!(!strong.excited_population(0.0, 0.0).unwrap().perturbative);
    }

    #[test]
    fn dipole_force_signs_and_zero_at_focus() {
        let it = reference();
        for v in [-3000.0, 0.0, 2500.0] {
            assert_eq!(it.dipole_force(0.0, v).unwrap(), 0.0);
            assert!(it.dipole_force(5e-5, v).unwrap() > 0.0);
            assert!(it.dipole_force(-5e-5, v).unwrap() < 0.0);
        }
        let red = Interaction::new(it.atom, it.beam, -DELTA).unwrap();
        assert!(red.dipole_force(5e-5, 0.0).unwrap() < 0.0);
    }

    fn potential_fd(it: &Interaction, r: f64, v: f64) -> f64 {
        let h = it.beam.rayleigh_length * 1e-5;
        -(it.effective_potential(r + h, v).unwrap() - it.effective_potential(r - h, v).unwrap())
            / (2.0 * h)
    }

    #[test]
    fn dipole_force_at_rayleigh_length_matches_fd() {
        let it = reference();
        let r = it.beam.rayleigh_length;
        let fd = potential_fd(&it, r, 0.0);
        let f = it.dipole_force(r, 0.0).unwrap();
        assert!((f - fd).abs() <= 1e-8 * f.abs());
    }

    #[test]
    fn bridge_reproduces_rest_force() {
        let it = reference();
        for r in [-2.5e-4, -7e-5, 1e-6, 1e-4, 3e-4] {
            let classical = it.dipole_force(r, 0.0).unwrap();
            let analytic = it.rest_force(r);
            assert!((classical - analytic).abs() <= 1e-12 * classical.abs());
        }
        let e0 = it.field_amplitude();
        assert!((it.atom.coupling_for_field(e0) - it.atom.coupling).abs() < 1e-12 * it.atom.coupling);
    }

    #[test]
    fn rest_coefficients_are_real() {
        let it = reference();
        for order in [Order::Exact, Order::FirstOrder] {
            let c = it.heisenberg_coefficients(-4e-5, 0.0, order).unwrap();
            assert_eq!(c.a.im, 0.0);
            assert_eq!(c.omega_tilde.im, 0.0);
            let omega_l = it.atom.transition_frequency + DELTA;
            assert!((c.omega_tilde.re - omega_l).abs() <= 1e-15 * omega_l);
        }
    }

    // The residual of the oscillator equations loses log10(ω_A/2Δ) digits to
    // cancellation, so the 1e-12 check uses a moderate ω_A/Δ.
    #[test]
    fn exact_coefficients_solve_oscillator_system() {
        let mut it = reference();
        it.atom.transition_frequency = 20.0 * DELTA;
        let q = it.atom.electron_charge;
        let e0 = it.field_amplitude();
        let me = it.atom.electron_mass;
        let ks = it.atom.spring_constant();
        for (r0, v0) in [(-2e-4, 2000.0), (5e-5, -1500.0), (0.0, 900.0)] {
            let c = it.heisenberg_coefficients(r0, v0, Order::Exact).unwrap();
            let w = c.omega_tilde;
            let i = Complex64::i();
            let row1 = c.b / me + i * w * c.a;
            let row2 = c.a * ks - i * w * c.b - q * e0 / 2.0;
            assert!(row1.norm() <= 1e-12 * (w * c.a).norm());
            assert!(row2.norm() <= 1e-12 * (q * e0 / 2.0).abs());
        }
    }

    #[test]
    fn exact_coefficients_solve_oscillator_system_at_optical_frequency() {
        let it = reference();
        let q = it.atom.electron_charge;
        let e0 = it.field_amplitude();
        let ks = it.atom.spring_constant();
        let conditioning = it.atom.transition_frequency / (2.0 * DELTA);
        let c = it.heisenberg_coefficients(-2e-4, 2000.0, Order::Exact).unwrap();
        let i = Complex64::i();
        let row2 = c.a * ks - i * c.omega_tilde * c.b - q * e0 / 2.0;
        assert!(row2.norm() <= 1e-12 * conditioning * (q * e0 / 2.0).abs());
    }

    #[test]
    fn first_order_tracks_exact_to_second_order() {
        let it = reference();
        let r0 = -2e-4;
        let v0 = 2000.0;
        let exact = it.heisenberg_coefficients(r0, v0, Order::Exact).unwrap().a;
        let first = it.heisenberg_coefficients(r0, v0, Order::FirstOrder).unwrap().a;
        let rel = (exact - first).norm() / exact.norm();
        let frac = (it.beam.wavevector() * v0 / DELTA).powi(2);
        assert!(rel < 0.05, "rel = {rel}");
        assert!(rel > 0.5 * frac && rel < 1.5 * frac, "rel = {rel}, (δ/Δ)² = {frac}");
    }

    #[test]
    fn first_order_total_is_closed_form() {
        let it = reference();
        for (r0, v0) in [(-2e-4, 2000.0), (3e-5, -1800.0), (1e-4, 500.0)] {
            let fb = it.analytic_force_breakdown(r0, v0, Order::FirstOrder).unwrap();
            let closed = it.rest_force(r0);
            assert!((fb.total - closed).abs() <= 1e-12 * closed.abs());
            assert_eq!(fb.total, fb.gradient_term + fb.phase_term);
        }
    }

    #[test]
    fn phase_term_vanishes_for_atom_at_rest() {
        let it = reference();
        for order in [Order::Exact, Order::FirstOrder] {
            let fb = it.analytic_force_breakdown(6e-5, 0.0, order).unwrap();
            assert_eq!(fb.phase_term, 0.0);
            assert_eq!(fb.total, fb.gradient_term);
        }
    }

    #[test]
    fn force_vanishes_at_focus() {
        let it = reference();
        for order in [Order::Exact, Order::FirstOrder] {
            let fb = it.analytic_force_breakdown(0.0, 1700.0, order).unwrap();
            assert_eq!(fb.gradient_term, 0.0);
            assert_eq!(fb.total, 0.0);
        }
    }

    #[test]
    fn residual_is_zero_at_rest() {
        assert_eq!(reference().velocity_dependence_residual(-1e-4, 0.0).unwrap(), 0.0);
    }

    #[test]
    fn residual_drops_eightfold_when_detuning_doubles() {
        // The cubic term is odd in V₀ and ~2kV₀/Δ relative to the quadratic
        // one, so the asymptotic 1/Δ³ law is checked at kV₀/Δ = 0.02.
        let it = reference();
        let r0 = -1e-4;
        let v0 = 200.0;
        let r1 = it.velocity_dependence_residual(r0, v0).unwrap();
        let doubled = it.retuned(2.0 * DELTA, ResidualConvention::FixedField).unwrap();
        let r2 = doubled.velocity_dependence_residual(r0, v0).unwrap();
        let ratio = r1 / r2;
        assert!((ratio - 8.0).abs() <= 0.8, "ratio = {ratio}");
    }

    #[test]
    fn residual_scaling_exponents() {
        let it = reference();
        let ds: std::vec::Vec<f64> = (0..=10).map(|i| DELTA * 10f64.powf(i as f64 / 10.0)).collect();
        let fixed = it
            .residual_scaling(-1e-4, 2000.0, &ds, ResidualConvention::FixedField)
            .unwrap();
        assert!((fixed.exponent + 3.0).abs() <= 0.3, "{}", fixed.exponent);
        let ratio = it
            .residual_scaling(-1e-4, 2000.0, &ds, ResidualConvention::FixedCouplingRatio)
            .unwrap();
        assert!((ratio.exponent + 1.0).abs() <= 0.3, "{}", ratio.exponent);
    }

    #[test]
    fn residual_is_quadratic_in_velocity() {
        let it = reference();
        let r0 = -1e-4;
        let rest = it.analytic_force_breakdown(r0, 0.0, Order::Exact).unwrap().total;
        let k = it.beam.wavevector();
        let mut worst: f64 = 0.0;
        for v0 in [50.0, 100.0, 200.0, 400.0] {
            let res = it.velocity_dependence_residual(r0, v0).unwrap();
            let x = k * v0 / DELTA;
            worst = worst.max(res.abs() / rest.abs() / (x * x));
        }
        // |residual| / |f(0)| ≤ C (kV₀/Δ)², C of order one
        assert!(worst < 2.0, "C = {worst}");
        std::println!("residual constant C = {worst:.4}");
    }

    #[test]
    fn gouy_enabled_still_cancels_at_first_order() {
        let mut it = reference();
        it.beam.gouy_enabled = true;
        let fb = it.analytic_force_breakdown(-8e-5, 1900.0, Order::FirstOrder).unwrap();
        let rest = it.rest_force(-8e-5);
        assert!((fb.total - rest).abs() <= 1e-12 * rest.abs());
    }

    proptest! {
        #[test]
        fn cancellation_identity(x in -3.0f64..3.0, frac in -0.2f64..0.2) {
            let it = reference();
            let r0 = x * it.beam.rayleigh_length;
            prop_assume!(r0.abs() > 1e-9);
            let v0 = frac * DELTA / it.beam.wavevector();
            let fb = it.analytic_force_breakdown(r0, v0, Order::FirstOrder).unwrap();
            let g = fb.gradient_velocity_part;
            let p = fb.phase_velocity_part;
            prop_assert!((g + p).abs() <= 1e-10 * g.abs().max(p.abs()).max(f64::MIN_POSITIVE));
            let rest = fb.velocity_independent_part;
            prop_assert!((fb.total - rest).abs() <= 1e-10 * rest.abs());
        }

        #[test]
        fn dipole_force_is_potential_gradient(x in -3.0f64..3.0, v in -3000.0f64..3000.0) {
            let it = reference();
            let r = x * it.beam.rayleigh_length;
            let f = it.dipole_force(r, v).unwrap();
            let fd = potential_fd(&it, r, v);
            // the difference quotient cannot resolve better than ε·U/h near the focus
            let floor = 1e-10 * it.effective_potential(0.0, v).unwrap().abs() / it.beam.rayleigh_length;
            prop_assert!((f - fd).abs() <= 1e-8 * f.abs() + floor);
        }

        #[test]
        fn potential_and_population_are_even(x in 0.0f64..5.0, v in -3000.0f64..3000.0) {
            let it = reference();
            let r = x * it.beam.rayleigh_length;
            prop_assert_eq!(it.effective_potential(r, v).unwrap(), it.effective_potential(-r, v).unwrap());
            prop_assert_eq!(
                it.excited_population(r, v).unwrap().probability,
                it.excited_population(-r, v).unwrap().probability
            );
        }
    }
}
