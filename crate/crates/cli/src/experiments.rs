//! Experiment drivers. Each returns plain results; writing them out is the
//! job of [`crate::run`]. Parallel drivers use the ambient rayon pool and
//! collect in input order, so results do not depend on the worker count.

use std::f64::consts::TAU;

use optoforce_core::classical::{
    self, integrate_trajectory, sweep_trajectory, ClassicalInitialState, Side, SweepOptions, SweepResult,
    Trajectory, TrajectoryOptions,
};
use optoforce_core::demon::{simulate_atom, EnsembleConfig, EnsembleReport};
use optoforce_core::forces::{ForceBreakdown, Order, ResidualConvention, ResidualScaling};
use optoforce_core::Interaction;
use optoforce_quantum::{evolve, init_gaussian_packet, Evolution, EvolveOptions, SpatialGrid};
use rayon::prelude::*;
use serde::Serialize;

use crate::config::{ExperimentConfig, ModelName};
use crate::error::CliError;

pub fn classical_trajectory(cfg: &ExperimentConfig) -> Result<Trajectory, CliError> {
    let it = cfg.interaction()?;
    let c = &cfg.classical;
    let opts = TrajectoryOptions {
        t_end: c.t_end,
        rel_tol: c.rel_tol,
        escape_radius: c.escape_radius,
        samples_per_step: c.samples_per_step,
        freeze_doppler: c.freeze_doppler,
        ..TrajectoryOptions::default()
    };
    let init = ClassicalInitialState {
        position: c.position,
        velocity: c.velocity,
    };
    Ok(integrate_trajectory(init, c.model.model(), &it, &opts)?)
}

/// Initial kinetic energies (J) of the sweep, evenly spaced.
pub fn sweep_energies(cfg: &ExperimentConfig, it: &Interaction) -> Vec<f64> {
    let [lo, hi] = cfg.sweep.energies_over_barrier;
    let n = cfg.sweep.points;
    let u0 = it.barrier_height();
    (0..n)
        .map(|i| u0 * (lo + (hi - lo) * i as f64 / (n - 1) as f64))
        .collect()
}

pub fn classical_sweep(cfg: &ExperimentConfig, model: ModelName) -> Result<SweepResult, CliError> {
    let it = cfg.interaction()?;
    let s = &cfg.sweep;
    let opts = SweepOptions {
        rel_tol: s.rel_tol,
        normalization_energy: s.normalization_energy,
        far_field_ratio: s.far_field_ratio,
        freeze_doppler: s.freeze_doppler,
        ..SweepOptions::default()
    };
    let energies = sweep_energies(cfg, &it);
    let jobs: Vec<(f64, Side)> = energies
        .iter()
        .flat_map(|&e| [(e, Side::Left), (e, Side::Right)])
        .collect();
    let outcomes = jobs
        .par_iter()
        .map(|&(e, side)| sweep_trajectory(&it, model.model(), e, side, &opts))
        .collect::<Result<Vec<_>, _>>()?;
    let (left, right): (Vec<_>, Vec<_>) = outcomes.into_iter().partition(|o| o.side == Side::Left);
    Ok(SweepResult::assemble(left, right, classical::normalization_energy(&it, &opts)))
}

/// One row of the analytic force table.
#[derive(Debug, Clone, Copy)]
pub struct ForceRow {
    pub position: f64,
    pub velocity: f64,
    pub breakdown: ForceBreakdown,
}

/// Positions evenly spanning ±`position_span`·L.
pub fn analytic_positions(cfg: &ExperimentConfig, it: &Interaction) -> Vec<f64> {
    let a = &cfg.analytic;
    let span = a.position_span * it.beam.rayleigh_length;
    (0..a.positions)
        .map(|i| -span + 2.0 * span * i as f64 / (a.positions - 1) as f64)
        .collect()
}

/// Velocities 0 < V ≤ V_max with kV_max/|Δ| = `max_doppler_fraction`.
pub fn analytic_velocities(cfg: &ExperimentConfig, it: &Interaction) -> Vec<f64> {
    let a = &cfg.analytic;
    let v_max = a.max_doppler_fraction * it.detuning.abs() / it.beam.wavevector();
    (1..=a.velocities).map(|j| v_max * j as f64 / a.velocities as f64).collect()
}

pub fn analytic_force_table(cfg: &ExperimentConfig, order: Order) -> Result<Vec<ForceRow>, CliError> {
    let it = cfg.interaction()?;
    let mut velocities = vec![0.0];
    velocities.extend(analytic_velocities(cfg, &it));
    let mut rows = Vec::new();
    for &r in &analytic_positions(cfg, &it) {
        for &v in &velocities {
            rows.push(ForceRow {
                position: r,
                velocity: v,
                breakdown: it.analytic_force_breakdown(r, v, order)?,
            });
        }
    }
    Ok(rows)
}

#[derive(Debug, Clone, Serialize)]
pub struct CancellationReport {
    /// Largest |f(R, V) − f(R, 0)|/|f(R, 0)| of the first-order total force.
    pub max_relative_velocity_dependence: f64,
    pub worst_position: f64,
    pub worst_velocity: f64,
    pub points: usize,
    pub tolerance: f64,
    pub residual_detunings: Vec<f64>,
    pub residual_values: Vec<f64>,
    /// Fitted p in |residual| ∝ Δ^p.
    pub residual_exponent: f64,
    pub expected_exponent: f64,
    pub exponent_tolerance: f64,
}

impl CancellationReport {
    pub fn cancellation_holds(&self) -> bool {
        self.max_relative_velocity_dependence <= self.tolerance
    }

    pub fn residual_law_holds(&self) -> bool {
        (self.residual_exponent - self.expected_exponent).abs() <= self.exponent_tolerance
    }
}

/// First-order velocity independence over the analytic grid (the focus,
/// where the force vanishes identically, is skipped) and the power law of
/// the exact-order residual over one decade of detuning.
pub fn cancellation_check(cfg: &ExperimentConfig) -> Result<CancellationReport, CliError> {
    let it = cfg.interaction()?;
    let a = &cfg.analytic;
    let mut worst = (0.0f64, f64::NAN, f64::NAN);
    let mut points = 0;
    for &r in &analytic_positions(cfg, &it) {
        let rest = it.analytic_force_breakdown(r, 0.0, Order::FirstOrder)?.total;
        if rest == 0.0 {
            continue;
        }
        for &v in &analytic_velocities(cfg, &it) {
            let f = it.analytic_force_breakdown(r, v, Order::FirstOrder)?.total;
            let rel = (f - rest).abs() / rest.abs();
            points += 1;
            if rel >= worst.0 {
                worst = (rel, r, v);
            }
        }
    }
    let n = a.residual_points;
    let detunings: Vec<f64> = (0..n)
        .map(|i| it.detuning * 10f64.powf(i as f64 / (n - 1) as f64))
        .collect();
    let ResidualScaling {
        detunings,
        residuals,
        exponent,
    } = it.residual_scaling(
        a.residual_position,
        a.residual_velocity,
        &detunings,
        ResidualConvention::FixedField,
    )?;
    Ok(CancellationReport {
        max_relative_velocity_dependence: worst.0,
        worst_position: worst.1,
        worst_velocity: worst.2,
        points,
        tolerance: a.cancellation_tolerance,
        residual_detunings: detunings,
        residual_values: residuals,
        residual_exponent: exponent,
        expected_exponent: a.residual_exponent,
        exponent_tolerance: a.residual_exponent_tolerance,
    })
}

pub fn ensemble_config(cfg: &ExperimentConfig, it: &Interaction, model: ModelName) -> EnsembleConfig {
    let e = &cfg.ensemble;
    let u0 = it.barrier_height();
    EnsembleConfig {
        energy_window: e.window_over_barrier.map(|[lo, hi]| (lo * u0, hi * u0)),
        rel_tol: e.rel_tol,
        freeze_doppler: e.freeze_doppler,
        ..EnsembleConfig::new(e.temperature, e.n_atoms, e.seed, model.model())
    }
}

pub fn demon_ensemble(cfg: &ExperimentConfig, model: ModelName) -> Result<EnsembleReport, CliError> {
    let it = cfg.interaction()?;
    let ec = ensemble_config(cfg, &it, model);
    ec.validate()?;
    let jobs: Vec<(Side, usize)> = [Side::Left, Side::Right]
        .into_iter()
        .flat_map(|s| (0..ec.n_atoms).map(move |i| (s, i)))
        .collect();
    let records = jobs
        .par_iter()
        .map(|&(side, index)| simulate_atom(&ec, &it, side, index))
        .collect::<Result<Vec<_>, _>>()?;
    Ok(EnsembleReport::from_records(ec.n_atoms, records)?)
}

/// Derived quantities of a quantum run.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct QuantumMetrics {
    pub max_norm_drift: f64,
    pub final_mean_position: f64,
    /// Smoothed speeds where ⟨R⟩ crosses ∓ the matched radius.
    pub incoming_speed: Option<f64>,
    pub outgoing_speed: Option<f64>,
    pub speed_ratio: Option<f64>,
    pub peak_excited_population: f64,
    pub final_excited_population: f64,
    pub expected_scattered_photons: f64,
    pub max_edge_mass: f64,
    pub force_agreement: ForceAgreement,
}

/// Largest relative gap between the filtered m·d²⟨R⟩/dt² and the filtered
/// density-weighted force, over records with P_E < 0.05 and
/// |⟨f⟩| ≥ 0.25·max|⟨f⟩|.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct ForceAgreement {
    /// Against the first-order (velocity-independent) analytic force.
    pub worst_first_order: f64,
    /// Against the all-orders oscillator force at the initial velocity.
    pub worst_exact_order: f64,
    pub compared_points: usize,
}

pub const PERTURBATIVE_POPULATION: f64 = 0.05;
pub const FORCE_FLOOR_FRACTION: f64 = 0.25;

pub struct QuantumRun {
    pub grid: SpatialGrid,
    pub evolution: Evolution,
    pub metrics: QuantumMetrics,
    pub dt: f64,
}

/// Default step: a hundred per detuning period.
pub fn quantum_dt(cfg: &ExperimentConfig) -> f64 {
    cfg.quantum.dt.unwrap_or(TAU / cfg.detuning().abs() / 100.0)
}

pub fn quantum_interaction(cfg: &ExperimentConfig) -> Result<Interaction, CliError> {
    let mut it = cfg.interaction()?;
    it.beam.gouy_enabled = cfg.quantum.gouy;
    Ok(it)
}

/// Run with `refine` halvings of both dx and dt.
pub fn quantum_evolve(cfg: &ExperimentConfig, refine: u32) -> Result<QuantumRun, CliError> {
    let it = quantum_interaction(cfg)?;
    let q = &cfg.quantum;
    let mass = it.atom.mass;
    let mut grid = SpatialGrid::new(q.r_min, q.r_max, q.n_points)?;
    let mut dt = quantum_dt(cfg);
    let mut stride = q.observer_stride;
    for _ in 0..refine {
        grid = grid.refined();
        dt *= 0.5;
        stride *= 2;
    }
    grid.check_resolution(mass, q.velocity, it.beam.wavelength)?;
    let state = init_gaussian_packet(q.position, q.velocity, q.sigma, mass, &grid)?;
    let opts = EvolveOptions {
        snapshot_every: q.snapshot_every,
        norm_tolerance: q.norm_tolerance,
        counter_propagating: q.counter_propagating,
        ..EvolveOptions::new(dt, q.t_end, stride)
    };
    let evolution = evolve(state, &grid, &it, &opts)?;
    let metrics = quantum_metrics(cfg, &it, &evolution)?;
    Ok(QuantumRun {
        grid,
        evolution,
        metrics,
        dt,
    })
}

fn quantum_metrics(cfg: &ExperimentConfig, it: &Interaction, ev: &Evolution) -> Result<QuantumMetrics, CliError> {
    let q = &cfg.quantum;
    let s = &ev.series;
    let last = s.len() - 1;
    let speeds = s.matched_speeds(
        q.matched_radius_fraction * q.position.abs(),
        q.velocity,
        q.smoothing_half_window,
    );
    let pts = s.filtered_force_comparison(it.atom.mass, q.force_filter_width);
    let f_peak = pts.iter().fold(0.0f64, |m, p| m.max(p.rest_force.abs()));
    let r_ref = it.beam.rayleigh_length;
    let exact_factor =
        it.analytic_force_breakdown(r_ref, q.velocity, Order::Exact)?.total / it.rest_force(r_ref);
    let mut agreement = ForceAgreement {
        worst_first_order: 0.0,
        worst_exact_order: 0.0,
        compared_points: 0,
    };
    for p in pts
        .iter()
        .filter(|p| p.excited_population < PERTURBATIVE_POPULATION && p.rest_force.abs() >= FORCE_FLOOR_FRACTION * f_peak)
    {
        let first = (p.mass_times_acceleration / p.rest_force - 1.0).abs();
        let exact = (p.mass_times_acceleration / (exact_factor * p.rest_force) - 1.0).abs();
        agreement.worst_first_order = agreement.worst_first_order.max(first);
        agreement.worst_exact_order = agreement.worst_exact_order.max(exact);
        agreement.compared_points += 1;
    }
    Ok(QuantumMetrics {
        max_norm_drift: s.max_norm_drift(),
        final_mean_position: s.mean_position[last],
        incoming_speed: speeds.map(|x| x.0),
        outgoing_speed: speeds.map(|x| x.1),
        speed_ratio: speeds.map(|(a, b)| b / a),
        peak_excited_population: s.excited_population.iter().cloned().fold(0.0, f64::max),
        final_excited_population: s.excited_population[last],
        expected_scattered_photons: ev.expected_scattered_photons,
        max_edge_mass: ev.max_edge_mass,
        force_agreement: agreement,
    })
}

/// Base run against one with dx and dt halved.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct ConvergenceReport {
    pub final_position_shift: f64,
    pub outgoing_speed_shift: Option<f64>,
}

pub fn convergence(base: &QuantumMetrics, refined: &QuantumMetrics) -> ConvergenceReport {
    ConvergenceReport {
        final_position_shift: (refined.final_mean_position / base.final_mean_position - 1.0).abs(),
        outgoing_speed_shift: match (base.outgoing_speed, refined.outgoing_speed) {
            (Some(a), Some(b)) => Some((b / a - 1.0).abs()),
            _ => None,
        },
    }
}
