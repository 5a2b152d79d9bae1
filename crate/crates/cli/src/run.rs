//! Subcommand execution: run the experiment, write its tables, then the
//! resolved configuration and a JSON sidecar describing the whole directory.

use std::time::Instant;

use optoforce_core::classical::{far_field_radius, reflection_thresholds, Exit, SweepResult, FAR_FIELD_RATIO};
use optoforce_core::demon::{EnsembleReport, Outcome};
use optoforce_core::Interaction;
use serde_json::{json, Value};

use crate::config::{ExperimentConfig, ModelName};
use crate::error::CliError;
use crate::experiments::{self, QuantumRun};
use crate::output::{sha256_hex, Cell, CsvTable, OutputDir};

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum Subcommand {
    ClassicalTrajectory,
    ClassicalSweep,
    QuantumEvolve,
    AnalyticForce,
    CancellationCheck,
    DemonEnsemble,
}

impl Subcommand {
    pub fn name(self) -> &'static str {
        match self {
            Subcommand::ClassicalTrajectory => "classical-trajectory",
            Subcommand::ClassicalSweep => "classical-sweep",
            Subcommand::QuantumEvolve => "quantum-evolve",
            Subcommand::AnalyticForce => "analytic-force",
            Subcommand::CancellationCheck => "cancellation-check",
            Subcommand::DemonEnsemble => "demon-ensemble",
        }
    }
}

/// What a finished run reports back to the caller.
#[derive(Debug)]
pub struct RunReport {
    pub metadata: Value,
    /// Set when the run completed but a pass/fail gate did not hold.
    pub gate_failure: Option<CliError>,
}

/// Run `cmd` and write every artifact into `out`.
pub fn execute(cmd: Subcommand, cfg: &ExperimentConfig, out: &mut OutputDir, workers: usize) -> Result<RunReport, CliError> {
    let start = Instant::now();
    let (summary, gate_failure) = match cmd {
        Subcommand::ClassicalTrajectory => (classical_trajectory(cfg, out)?, None),
        Subcommand::ClassicalSweep => (classical_sweep(cfg, out)?, None),
        Subcommand::QuantumEvolve => (quantum_evolve(cfg, out)?, None),
        Subcommand::AnalyticForce => (analytic_force(cfg, out)?, None),
        Subcommand::CancellationCheck => cancellation_check(cfg, out)?,
        Subcommand::DemonEnsemble => (demon_ensemble(cfg, out)?, None),
    };
    let resolved = cfg.resolved();
    let toml_text = resolved.to_toml();
    out.write("resolved_config.toml", toml_text.as_bytes())?;
    let metadata = json!({
        "tool": "optoforce",
        "version": env!("CARGO_PKG_VERSION"),
        "subcommand": cmd.name(),
        "preset": resolved.preset,
        "config": serde_json::to_value(&resolved).expect("configuration serialises to JSON"),
        "config_sha256": sha256_hex(toml_text.as_bytes()),
        "workers": workers,
        "timings": { "wall_seconds": start.elapsed().as_secs_f64() },
        "files": out.checksums(),
        "summary": summary,
        "gate_failure": gate_failure.as_ref().map(|e| e.to_json()),
    });
    let pretty = serde_json::to_string_pretty(&metadata).expect("metadata serialises");
    out.write("metadata.json", pretty.as_bytes())?;
    Ok(RunReport { metadata, gate_failure })
}

fn exit_name(e: Exit) -> &'static str {
    match e {
        Exit::EscapedPositive => "escaped-positive",
        Exit::EscapedNegative => "escaped-negative",
        Exit::TimeLimit => "time-limit",
    }
}

fn model_slug(m: ModelName) -> &'static str {
    m.model().name()
}

fn classical_trajectory(cfg: &ExperimentConfig, out: &mut OutputDir) -> Result<Value, CliError> {
    let tr = experiments::classical_trajectory(cfg)?;
    let mut t = CsvTable::new(&[
        ("t", "s"),
        ("R", "m"),
        ("v", "m/s"),
        ("kinetic_energy", "J"),
        ("potential", "J"),
        ("force", "N"),
    ]);
    for i in 0..tr.len() {
        t.push(vec![
            tr.times[i].into(),
            tr.positions[i].into(),
            tr.velocities[i].into(),
            tr.kinetic_energies[i].into(),
            tr.potential_samples[i].into(),
            tr.forces[i].into(),
        ]);
    }
    out.write_csv("trajectory.csv", &t)?;
    let audit = tr.energy_audit();
    Ok(json!({
        "force_model": tr.force_model.name(),
        "exit": exit_name(tr.exit),
        "samples": tr.len(),
        "initial_velocity": tr.velocities[0],
        "final_velocity": tr.final_velocity(),
        "final_position": tr.final_position(),
        "delta_kinetic_energy": tr.delta_kinetic_energy(),
        "work_integral": audit.work,
        "energy_audit_relative_error": audit.relative_error,
        "steps_accepted": tr.stats.accepted,
        "steps_rejected": tr.stats.rejected,
    }))
}

fn sweep_table(r: &SweepResult) -> CsvTable {
    let mut t = CsvTable::new(&[
        ("initial_energy", "J"),
        ("initial_energy_normalized", "1"),
        ("delta_ke_left", "J"),
        ("delta_ke_right", "J"),
        ("delta_ke_left_normalized", "1"),
        ("delta_ke_right_normalized", "1"),
        ("reflected_left", "1"),
        ("reflected_right", "1"),
        ("audit_left", "1"),
        ("audit_right", "1"),
    ]);
    for i in 0..r.left.len() {
        let (l, rr) = (&r.left[i], &r.right[i]);
        t.push(vec![
            l.initial_energy.into(),
            r.initial_energies[i].into(),
            l.delta_kinetic_energy.into(),
            rr.delta_kinetic_energy.into(),
            r.delta_ke_left[i].into(),
            r.delta_ke_right[i].into(),
            (l.reflected() as usize).into(),
            (rr.reflected() as usize).into(),
            l.audit.relative_error.into(),
            rr.audit.relative_error.into(),
        ]);
    }
    t
}

fn classical_sweep(cfg: &ExperimentConfig, out: &mut OutputDir) -> Result<Value, CliError> {
    let it = cfg.interaction()?;
    let mut per_model = serde_json::Map::new();
    for &m in &cfg.sweep.models {
        let r = experiments::classical_sweep(cfg, m)?;
        out.write_csv(&format!("sweep_{}.csv", model_slug(m)), &sweep_table(&r))?;
        let worst_audit = r
            .left
            .iter()
            .chain(&r.right)
            .fold(0.0f64, |a, o| a.max(o.audit.relative_error));
        per_model.insert(
            model_slug(m).into(),
            json!({
                "normalization_energy": r.normalization_energy,
                "reflected_left": r.left.iter().filter(|o| o.reflected()).count(),
                "reflected_right": r.right.iter().filter(|o| o.reflected()).count(),
                "worst_energy_audit": worst_audit,
            }),
        );
    }
    let thresholds = dipole_thresholds(&it)?;
    Ok(json!({
        "barrier_height": it.barrier_height(),
        "dipole_reflection_threshold_left": thresholds.0,
        "dipole_reflection_threshold_right": thresholds.1,
        "models": per_model,
    }))
}

fn dipole_thresholds(it: &Interaction) -> Result<(f64, f64), CliError> {
    let r_far = far_field_radius(it, it.barrier_height(), FAR_FIELD_RATIO)?;
    Ok(reflection_thresholds(it, r_far)?)
}

fn quantum_tables(run: &QuantumRun, out: &mut OutputDir, prefix: &str, cfg: &ExperimentConfig) -> Result<(), CliError> {
    let s = &run.evolution.series;
    let mut obs = CsvTable::new(&[
        ("t", "s"),
        ("norm", "1"),
        ("mean_R", "m"),
        ("width", "m"),
        ("excited_population", "1"),
        ("mean_force", "N"),
    ]);
    for i in 0..s.len() {
        obs.push(vec![
            s.times[i].into(),
            s.norm[i].into(),
            s.mean_position[i].into(),
            s.width[i].into(),
            s.excited_population[i].into(),
            s.mean_rest_force[i].into(),
        ]);
    }
    out.write_csv(&format!("{prefix}observables.csv"), &obs)?;
    let mut vel = CsvTable::new(&[("t", "s"), ("velocity", "m/s"), ("kinetic_energy", "J")]);
    for i in 0..s.velocity.len() {
        vel.push(vec![s.velocity_times[i].into(), s.velocity[i].into(), s.kinetic_energy[i].into()]);
    }
    out.write_csv(&format!("{prefix}velocity.csv"), &vel)?;
    let q = &cfg.quantum;
    let mut sm = CsvTable::new(&[("t", "s"), ("mean_R", "m"), ("velocity", "m/s"), ("acceleration", "m/s^2")]);
    for p in s.smoothed(q.smoothing_half_window) {
        sm.push(vec![p.t.into(), p.position.into(), p.velocity.into(), p.acceleration.into()]);
    }
    out.write_csv(&format!("{prefix}smoothed.csv"), &sm)?;
    let mass = cfg.atom_config().mass;
    let mut fc = CsvTable::new(&[
        ("t", "s"),
        ("mass_times_acceleration", "N"),
        ("mean_force", "N"),
        ("excited_population", "1"),
    ]);
    for p in s.filtered_force_comparison(mass, q.force_filter_width) {
        fc.push(vec![
            p.t.into(),
            p.mass_times_acceleration.into(),
            p.rest_force.into(),
            p.excited_population.into(),
        ]);
    }
    out.write_csv(&format!("{prefix}force_comparison.csv"), &fc)?;
    for (i, snap) in run.evolution.snapshots.iter().enumerate() {
        let snap = match q.snapshot_rotation {
            Some(omega) => snap.rotated(omega),
            None => snap.clone(),
        };
        let mut buf = Vec::new();
        snap.write_csv(&run.grid, &mut buf)
            .map_err(|e| CliError::io(out.path().join("snapshots"), e))?;
        out.write(&format!("{prefix}snapshots/snapshot_{i:05}.csv"), &buf)?;
    }
    Ok(())
}

fn quantum_evolve(cfg: &ExperimentConfig, out: &mut OutputDir) -> Result<Value, CliError> {
    let run = experiments::quantum_evolve(cfg, 0)?;
    quantum_tables(&run, out, "", cfg)?;
    let mut summary = json!({
        "dt": run.dt,
        "steps": run.evolution.steps,
        "grid_points": run.grid.n_points,
        "dx": run.grid.dx(),
        "snapshots": run.evolution.snapshots.len(),
        "metrics": run.metrics,
    });
    if cfg.quantum.convergence_check {
        let fine = experiments::quantum_evolve(cfg, 1)?;
        quantum_tables(&fine, out, "refined/", cfg)?;
        summary["refined_metrics"] = json!(fine.metrics);
        summary["convergence"] = json!(experiments::convergence(&run.metrics, &fine.metrics));
    }
    Ok(summary)
}

fn analytic_force(cfg: &ExperimentConfig, out: &mut OutputDir) -> Result<Value, CliError> {
    let order = cfg.analytic.order.order();
    let rows = experiments::analytic_force_table(cfg, order)?;
    let mut t = CsvTable::new(&[
        ("R", "m"),
        ("V", "m/s"),
        ("gradient_term", "N"),
        ("phase_term", "N"),
        ("total", "N"),
        ("velocity_independent", "N"),
        ("first_order_velocity", "N"),
        ("gradient_velocity", "N"),
        ("phase_velocity", "N"),
        ("higher_order", "N"),
    ]);
    for r in &rows {
        let b = &r.breakdown;
        t.push(vec![
            r.position.into(),
            r.velocity.into(),
            b.gradient_term.into(),
            b.phase_term.into(),
            b.total.into(),
            b.velocity_independent_part.into(),
            b.first_order_velocity_part.into(),
            b.gradient_velocity_part.into(),
            b.phase_velocity_part.into(),
            b.residual_higher_order.into(),
        ]);
    }
    out.write_csv("forces.csv", &t)?;
    Ok(json!({
        "order": cfg.analytic.order,
        "rows": rows.len(),
    }))
}

fn cancellation_check(cfg: &ExperimentConfig, out: &mut OutputDir) -> Result<(Value, Option<CliError>), CliError> {
    let rep = experiments::cancellation_check(cfg)?;
    let mut t = CsvTable::new(&[("detuning", "rad/s"), ("velocity_dependent_residual", "N")]);
    for (d, r) in rep.residual_detunings.iter().zip(&rep.residual_values) {
        t.push(vec![Cell::Float(*d), Cell::Float(*r)]);
    }
    out.write_csv("residual_scaling.csv", &t)?;
    let gate = if !rep.cancellation_holds() {
        Some(CliError::Gate {
            gate: "first-order-cancellation".into(),
            message: format!(
                "max relative velocity dependence {:e} exceeds {:e}",
                rep.max_relative_velocity_dependence, rep.tolerance
            ),
        })
    } else if !rep.residual_law_holds() {
        Some(CliError::Gate {
            gate: "residual-power-law".into(),
            message: format!(
                "fitted exponent {} is not within {} of {}",
                rep.residual_exponent, rep.exponent_tolerance, rep.expected_exponent
            ),
        })
    } else {
        None
    };
    let mut v = json!(rep);
    v["cancellation_holds"] = json!(rep.cancellation_holds());
    v["residual_law_holds"] = json!(rep.residual_law_holds());
    Ok((v, gate))
}

fn outcome_name(o: Outcome) -> &'static str {
    match o {
        Outcome::Passed => "passed",
        Outcome::Reflected => "reflected",
        Outcome::Invalid => "invalid",
    }
}

pub fn ensemble_summary(r: &EnsembleReport) -> Value {
    json!({
        "n_atoms_per_side": r.n_atoms,
        "left_to_right_passed": r.n_left_to_right_passed,
        "right_to_left_passed": r.n_right_to_left_passed,
        "reflected_left": r.n_reflected_left,
        "reflected_right": r.n_reflected_right,
        "invalid": r.n_invalid,
        "asymmetry": r.asymmetry,
        "z_score": r.z_score,
        "delta_entropy": r.delta_entropy,
        "final_counts": r.final_counts(),
        "apparent_second_law_violation": r.apparent_second_law_violation(),
    })
}

fn demon_ensemble(cfg: &ExperimentConfig, out: &mut OutputDir) -> Result<Value, CliError> {
    let mut per_model = serde_json::Map::new();
    for &m in &cfg.ensemble.models {
        let r = experiments::demon_ensemble(cfg, m)?;
        let mut t = CsvTable::new(&[
            ("index", "1"),
            ("side", "1"),
            ("initial_velocity", "m/s"),
            ("outcome", "1"),
            ("delta_kinetic_energy", "J"),
        ]);
        for a in &r.records {
            t.push(vec![
                a.index.into(),
                match a.side {
                    optoforce_core::classical::Side::Left => "left".into(),
                    optoforce_core::classical::Side::Right => "right".into(),
                },
                a.initial_velocity.into(),
                outcome_name(a.outcome).into(),
                a.delta_kinetic_energy.into(),
            ]);
        }
        out.write_csv(&format!("atoms_{}.csv", model_slug(m)), &t)?;
        per_model.insert(model_slug(m).into(), ensemble_summary(&r));
    }
    Ok(json!({ "seed": cfg.ensemble.seed, "models": per_model }))
}
