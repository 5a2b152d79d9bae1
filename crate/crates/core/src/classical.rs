//! Newtonian motion of a point atom along the beam axis.
//!
//! The state is `(R, v)` and the force is one of the models in
//! [`ForceModel`]. Trajectories are integrated with the adaptive
//! Dormand–Prince scheme in [`crate::ode`] and sampled on its dense output.

use alloc::vec::Vec;
use core::ops::ControlFlow;

use crate::error::{Error, Result};
use crate::forces::{Interaction, Order};
use crate::math;
use crate::ode::{self, Stats};

/// Dense samples per accepted step. The trapezoidal work audit converges as
/// 1/n², and 64 keeps it near 1e-7 at the default tolerance.
pub const DEFAULT_SAMPLES_PER_STEP: usize = 64;

/// Speed whose kinetic energy sets the unit of the energy sweep.
pub const NORMALIZATION_SPEED: f64 = 3400.0;

/// Default ratio U(R_far)/KE below which the beam is considered switched off.
pub const FAR_FIELD_RATIO: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum ForceModel {
    /// Free flight.
    None,
    /// −∂U/∂R with the Doppler-shifted detuning at the instantaneous velocity.
    #[default]
    DipoleOnly,
    /// Intensity-gradient plus phase-gradient force from the oscillator model.
    DipolePlusPhase(Order),
}

impl ForceModel {
    pub fn name(&self) -> &'static str {
        match self {
            ForceModel::None => "none",
            ForceModel::DipoleOnly => "dipole_only",
            ForceModel::DipolePlusPhase(_) => "dipole_plus_phase",
        }
    }

    /// Force on the axis at `(r, v)`. With `freeze_doppler` the dipole force
    /// is evaluated as if the atom were at rest, which makes it conservative.
    pub fn force(&self, it: &Interaction, r: f64, v: f64, freeze_doppler: bool) -> Result<f64> {
        match self {
            ForceModel::None => Ok(0.0),
            ForceModel::DipoleOnly => it.dipole_force(r, if freeze_doppler { 0.0 } else { v }),
            ForceModel::DipolePlusPhase(order) => {
                Ok(it.analytic_force_breakdown(r, v, *order)?.total)
            }
        }
    }

    /// Potential reported alongside the trajectory. For the oscillator model
    /// this is the rest potential whose gradient is the velocity-independent
    /// force.
    pub fn potential(&self, it: &Interaction, r: f64, v: f64, freeze_doppler: bool) -> Result<f64> {
        match self {
            ForceModel::None => Ok(0.0),
            ForceModel::DipoleOnly => it.effective_potential(r, if freeze_doppler { 0.0 } else { v }),
            ForceModel::DipolePlusPhase(_) => {
                let q = it.atom.electron_charge;
                let e0 = it.field_amplitude();
                let c = q * q * e0 * e0 / (4.0 * it.atom.transition_frequency * it.atom.electron_mass);
                let f = it.beam.envelope(r);
                Ok(c * f * f / (2.0 * it.detuning))
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ClassicalInitialState {
    /// R₀ (m).
    pub position: f64,
    /// V₀ (m/s).
    pub velocity: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrajectoryOptions {
    pub t_end: f64,
    pub rel_tol: f64,
    /// Stop once |R| exceeds this; defaults to 3|R₀|.
    pub escape_radius: Option<f64>,
    /// Dense-output samples recorded inside each accepted step.
    pub samples_per_step: usize,
    /// Test hook: evaluate the dipole force at v = 0.
    pub freeze_doppler: bool,
    pub max_steps: usize,
}

impl Default for TrajectoryOptions {
    fn default() -> Self {
        TrajectoryOptions {
            t_end: 1e-6,
            rel_tol: 1e-10,
            escape_radius: None,
            samples_per_step: DEFAULT_SAMPLES_PER_STEP,
            freeze_doppler: false,
            max_steps: 1_000_000,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Exit {
    EscapedPositive,
    EscapedNegative,
    TimeLimit,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub mass: f64,
    pub force_model: ForceModel,
    pub times: Vec<f64>,
    pub positions: Vec<f64>,
    pub velocities: Vec<f64>,
    pub kinetic_energies: Vec<f64>,
    pub potential_samples: Vec<f64>,
    pub forces: Vec<f64>,
    pub exit: Exit,
    pub stats: Stats,
}

/// Work–energy comparison for one trajectory.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EnergyAudit {
    pub delta_kinetic_energy: f64,
    /// Trapezoidal ∫ f v dt over the recorded samples.
    pub work: f64,
    /// Largest |KE(t) − KE(0)|, the scale for the relative error.
    pub scale: f64,
    pub relative_error: f64,
}

impl Trajectory {
    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn initial_kinetic_energy(&self) -> f64 {
        self.kinetic_energies[0]
    }

    pub fn final_kinetic_energy(&self) -> f64 {
        self.kinetic_energies[self.len() - 1]
    }

    pub fn final_velocity(&self) -> f64 {
        self.velocities[self.len() - 1]
    }

    pub fn final_position(&self) -> f64 {
        self.positions[self.len() - 1]
    }

    pub fn delta_kinetic_energy(&self) -> f64 {
        self.final_kinetic_energy() - self.initial_kinetic_energy()
    }

    pub fn work_integral(&self) -> f64 {
        let mut w = 0.0;
        for i in 1..self.len() {
            let p0 = self.forces[i - 1] * self.velocities[i - 1];
            let p1 = self.forces[i] * self.velocities[i];
            w += 0.5 * (p0 + p1) * (self.times[i] - self.times[i - 1]);
        }
        w
    }

    pub fn energy_audit(&self) -> EnergyAudit {
        let ke0 = self.initial_kinetic_energy();
        let scale = self
            .kinetic_energies
            .iter()
            .fold(0.0f64, |m, &ke| m.max((ke - ke0).abs()));
        let delta = self.delta_kinetic_energy();
        let work = self.work_integral();
        let relative_error = if scale > 0.0 {
            (work - delta).abs() / scale
        } else {
            work.abs()
        };
        EnergyAudit {
            delta_kinetic_energy: delta,
            work,
            scale,
            relative_error,
        }
    }
}

/// Integrate the axial motion from `init` until escape or `opts.t_end`.
pub fn integrate_trajectory(
    init: ClassicalInitialState,
    model: ForceModel,
    it: &Interaction,
    opts: &TrajectoryOptions,
) -> Result<Trajectory> {
    Error::check_finite("initial.position", init.position)?;
    Error::check_finite("initial.velocity", init.velocity)?;
    Error::check_positive("t_end", opts.t_end)?;
    if !(1e-14..=1e-4).contains(&opts.rel_tol) {
        return Err(Error::InvalidParameter {
            name: "rel_tol",
            constraint: "within [1e-14, 1e-4]",
            value: opts.rel_tol,
        });
    }
    if opts.samples_per_step == 0 {
        return Err(Error::InvalidParameter {
            name: "samples_per_step",
            constraint: ">= 1",
            value: 0.0,
        });
    }
    let escape = opts.escape_radius.unwrap_or(3.0 * init.position.abs());
    Error::check_positive("escape_radius", escape)?;

    let mass = it.atom.mass;
    let freeze = opts.freeze_doppler;
    let rhs = |_t: f64, y: &[f64; 2]| -> Result<[f64; 2]> {
        Ok([y[1], model.force(it, y[0], y[1], freeze)? / mass])
    };

    let v_scale = init.velocity.abs().max(1e-3);
    let mut ode_opts = ode::Options::new(
        opts.rel_tol,
        [opts.rel_tol * it.beam.rayleigh_length, opts.rel_tol * v_scale],
    );
    ode_opts.max_steps = opts.max_steps;

    let mut tr = Trajectory {
        mass,
        force_model: model,
        times: Vec::new(),
        positions: Vec::new(),
        velocities: Vec::new(),
        kinetic_energies: Vec::new(),
        potential_samples: Vec::new(),
        forces: Vec::new(),
        exit: Exit::TimeLimit,
        stats: Stats::default(),
    };
    let mut failure: Option<Error> = None;
    let push = |tr: &mut Trajectory, t: f64, r: f64, v: f64| -> Result<()> {
        tr.times.push(t);
        tr.positions.push(r);
        tr.velocities.push(v);
        tr.kinetic_energies.push(0.5 * mass * v * v);
        tr.potential_samples.push(model.potential(it, r, v, freeze)?);
        tr.forces.push(model.force(it, r, v, freeze)?);
        Ok(())
    };
    push(&mut tr, 0.0, init.position, init.velocity)?;

    let n = opts.samples_per_step;
    // Never let one step carry the atom across the beam: the displacement per
    // step is held below max(|R|/2, L/10).
    let rayleigh = it.beam.rayleigh_length;
    let v_floor = math::sqrt(2.0 * it.barrier_height().abs() / mass).max(1e-3);
    let cap = |y: &[f64; 2]| (0.5 * y[0].abs()).max(0.1 * rayleigh) / y[1].abs().max(v_floor);
    let sol = ode::integrate_capped(rhs, 0.0, [init.position, init.velocity], opts.t_end, &ode_opts, cap, |step| {
        for j in 1..=n {
            let (t, y) = if j == n {
                (step.t1, step.y1)
            } else {
                let t = step.t0 + (step.t1 - step.t0) * j as f64 / n as f64;
                (t, step.dense(t))
            };
            if let Err(e) = push(&mut tr, t, y[0], y[1]) {
                failure = Some(e);
                return ControlFlow::Break(());
            }
        }
        if step.y1[0].abs() > escape {
            ControlFlow::Break(())
        } else {
            ControlFlow::Continue(())
        }
    })?;
    if let Some(e) = failure {
        return Err(e);
    }
    tr.stats = sol.stats;
    tr.exit = if sol.stopped {
        if sol.y[0] > 0.0 {
            Exit::EscapedPositive
        } else {
            Exit::EscapedNegative
        }
    } else {
        Exit::TimeLimit
    };
    Ok(tr)
}

/// Which chamber the atom starts in.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Side {
    /// Starts at −R_far moving in +R, along the beam.
    Left,
    /// Starts at +R_far moving in −R, against the beam.
    Right,
}

impl Side {
    pub fn sign(self) -> f64 {
        match self {
            Side::Left => 1.0,
            Side::Right => -1.0,
        }
    }

    /// Exit through which an atom from this side has passed the focus.
    pub fn pass_exit(self) -> Exit {
        match self {
            Side::Left => Exit::EscapedPositive,
            Side::Right => Exit::EscapedNegative,
        }
    }
}

/// Distance at which the light shift seen by an atom of kinetic energy `ke`
/// has fallen to `ratio`·`ke`, for either direction of travel.
pub fn far_field_radius(it: &Interaction, ke: f64, ratio: f64) -> Result<f64> {
    Error::check_positive("kinetic_energy", ke)?;
    Error::check_positive("far_field_ratio", ratio)?;
    let v = math::sqrt(2.0 * ke / it.atom.mass);
    let u0 = it
        .effective_potential(0.0, v)?
        .abs()
        .max(it.effective_potential(0.0, -v)?.abs());
    let x = u0 / (ratio * ke);
    Ok(it.beam.rayleigh_length * math::sqrt((x - 1.0).max(1.0)))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SweepOptions {
    pub rel_tol: f64,
    pub samples_per_step: usize,
    /// Energy unit of the result; defaults to ½m·(3400 m/s)².
    pub normalization_energy: Option<f64>,
    /// U(R_far)/KE at the launch point.
    pub far_field_ratio: f64,
    pub freeze_doppler: bool,
}

impl Default for SweepOptions {
    fn default() -> Self {
        SweepOptions {
            rel_tol: 1e-10,
            samples_per_step: DEFAULT_SAMPLES_PER_STEP,
            normalization_energy: None,
            far_field_ratio: FAR_FIELD_RATIO,
            freeze_doppler: false,
        }
    }
}

/// One trajectory of a sweep, in SI units.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SweepOutcome {
    pub side: Side,
    pub initial_energy: f64,
    pub delta_kinetic_energy: f64,
    pub exit: Exit,
    pub audit: EnergyAudit,
}

impl SweepOutcome {
    pub fn reflected(&self) -> bool {
        self.exit != self.side.pass_exit()
    }
}

/// Launch one atom of kinetic energy `ke` from the far field on `side`.
pub fn sweep_trajectory(
    it: &Interaction,
    model: ForceModel,
    ke: f64,
    side: Side,
    opts: &SweepOptions,
) -> Result<SweepOutcome> {
    let r_far = far_field_radius(it, ke, opts.far_field_ratio)?;
    let speed = math::sqrt(2.0 * ke / it.atom.mass);
    let init = ClassicalInitialState {
        position: -side.sign() * r_far,
        velocity: side.sign() * speed,
    };
    let topts = TrajectoryOptions {
        // generous: a reflected atom covers 2 R_far, slowly near the turn
        t_end: 40.0 * r_far / speed,
        rel_tol: opts.rel_tol,
        escape_radius: Some(1.01 * r_far),
        samples_per_step: opts.samples_per_step,
        freeze_doppler: opts.freeze_doppler,
        max_steps: 1_000_000,
    };
    let tr = integrate_trajectory(init, model, it, &topts)?;
    Ok(SweepOutcome {
        side,
        initial_energy: ke,
        delta_kinetic_energy: tr.delta_kinetic_energy(),
        exit: tr.exit,
        audit: tr.energy_audit(),
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepResult {
    /// Initial kinetic energies in units of `normalization_energy`.
    pub initial_energies: Vec<f64>,
    pub delta_ke_left: Vec<f64>,
    pub delta_ke_right: Vec<f64>,
    /// J.
    pub normalization_energy: f64,
    pub left: Vec<SweepOutcome>,
    pub right: Vec<SweepOutcome>,
}

impl SweepResult {
    /// Build from per-energy outcomes listed in input order.
    pub fn assemble(left: Vec<SweepOutcome>, right: Vec<SweepOutcome>, normalization_energy: f64) -> Self {
        let e = normalization_energy;
        SweepResult {
            initial_energies: left.iter().map(|o| o.initial_energy / e).collect(),
            delta_ke_left: left.iter().map(|o| o.delta_kinetic_energy / e).collect(),
            delta_ke_right: right.iter().map(|o| o.delta_kinetic_energy / e).collect(),
            normalization_energy,
            left,
            right,
        }
    }
}

pub fn normalization_energy(it: &Interaction, opts: &SweepOptions) -> f64 {
    opts.normalization_energy
        .unwrap_or(0.5 * it.atom.mass * NORMALIZATION_SPEED * NORMALIZATION_SPEED)
}

/// Left- and right-incident runs for each initial kinetic energy (J).
pub fn energy_change_sweep(
    energies: &[f64],
    it: &Interaction,
    model: ForceModel,
    opts: &SweepOptions,
) -> Result<SweepResult> {
    let mut left = Vec::with_capacity(energies.len());
    let mut right = Vec::with_capacity(energies.len());
    for &ke in energies {
        left.push(sweep_trajectory(it, model, ke, Side::Left, opts)?);
        right.push(sweep_trajectory(it, model, ke, Side::Right, opts)?);
    }
    Ok(SweepResult::assemble(left, right, normalization_energy(it, opts)))
}

/// Kinetic-energy thresholds for reflection under the dipole-only model,
/// from the exact constant of motion m(Δv²/2 − kv³/3) + M₀²F(R)²/ħ.
///
/// Returns `(left, right)`: an atom launched from `side` at distance `r_start`
/// is reflected iff its kinetic energy is below that side's threshold.
pub fn reflection_thresholds(it: &Interaction, r_start: f64) -> Result<(f64, f64)> {
    let m = it.atom.mass;
    let k = it.beam.wavevector();
    let delta = it.detuning;
    let m0 = it.atom.coupling;
    let fi = it.beam.envelope(r_start);
    let drop = m0 * m0 / crate::constants::HBAR * (1.0 - fi * fi) / m;
    // g(v) = Δv²/2 ∓ k v³/3 is monotone on 0 < v < Δ/k; solve g(v) = drop.
    let solve = |sign: f64| -> Result<f64> {
        let g = |v: f64| delta * v * v / 2.0 + sign * k * v * v * v / 3.0;
        let mut lo = 0.0;
        let mut hi = if sign < 0.0 { delta / k } else { math::sqrt(2.0 * drop / delta) };
        if g(hi) < drop {
            return Err(Error::InvalidParameter {
                name: "coupling",
                constraint: "small enough for the barrier to be crossed below the Doppler resonance",
                value: m0,
            });
        }
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if g(mid) < drop {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        let v = 0.5 * (lo + hi);
        Ok(0.5 * m * v * v)
    };
    Ok((solve(-1.0)?, solve(1.0)?))
}
