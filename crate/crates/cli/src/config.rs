//! Experiment configuration: a TOML document layered as preset, then file,
//! then `--set` overrides, validated into an [`ExperimentConfig`].
//!
//! Every section has defaults except the physical parameters, which must
//! come from a preset or the file. Unknown keys are errors at every level.

use std::path::{Path, PathBuf};

use optoforce_core::classical::ForceModel;
use optoforce_core::constants::{ELECTRON_MASS, ELEMENTARY_CHARGE, HBAR, SPEED_OF_LIGHT};
use optoforce_core::forces::Order;
use optoforce_core::{AtomConfig, BeamConfig, Interaction};
use serde::{Deserialize, Serialize};
use toml::{Table, Value};

use crate::error::CliError;
use crate::presets;
use crate::quantity::deserialize_frequency;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    /// Name of the preset the configuration started from.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub preset: Option<String>,
    /// Static detuning Δ = ω_L − ω_A (rad/s).
    #[serde(default, deserialize_with = "deserialize_frequency", skip_serializing_if = "Option::is_none")]
    pub detuning: Option<f64>,
    #[serde(default)]
    pub beam: BeamSection,
    #[serde(default)]
    pub atom: AtomSection,
    #[serde(default)]
    pub classical: ClassicalSection,
    #[serde(default)]
    pub sweep: SweepSection,
    #[serde(default)]
    pub quantum: QuantumSection,
    #[serde(default)]
    pub analytic: AnalyticSection,
    #[serde(default)]
    pub ensemble: EnsembleSection,
    #[serde(default)]
    pub output: OutputSection,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct BeamSection {
    /// m
    #[serde(skip_serializing_if = "Option::is_none")]
    pub wavelength: Option<f64>,
    /// m
    #[serde(skip_serializing_if = "Option::is_none")]
    pub rayleigh_length: Option<f64>,
    /// ω_L (rad/s); defaults to 2πc/λ.
    #[serde(deserialize_with = "deserialize_frequency", skip_serializing_if = "Option::is_none")]
    pub angular_frequency: Option<f64>,
    /// E₀ (V/m) for the oscillator model; defaults to the value bridged from M₀.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub field_amplitude: Option<f64>,
    pub gouy: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct AtomSection {
    /// kg
    #[serde(skip_serializing_if = "Option::is_none")]
    pub mass: Option<f64>,
    /// M₀/ħΔ (dimensionless).
    #[serde(skip_serializing_if = "Option::is_none")]
    pub coupling_ratio: Option<f64>,
    /// Radiative lifetime τ (s).
    pub lifetime: f64,
    /// ω_A (rad/s); defaults to ω_L − Δ.
    #[serde(deserialize_with = "deserialize_frequency", skip_serializing_if = "Option::is_none")]
    pub transition_frequency: Option<f64>,
    /// kg
    pub electron_mass: f64,
    /// C
    pub electron_charge: f64,
}

impl Default for AtomSection {
    fn default() -> Self {
        AtomSection {
            mass: None,
            coupling_ratio: None,
            lifetime: 1e-3,
            transition_frequency: None,
            electron_mass: ELECTRON_MASS,
            electron_charge: -ELEMENTARY_CHARGE,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ModelName {
    None,
    DipoleOnly,
    DipolePlusPhase,
    DipolePlusPhaseExact,
}

impl ModelName {
    pub fn model(self) -> ForceModel {
        match self {
            ModelName::None => ForceModel::None,
            ModelName::DipoleOnly => ForceModel::DipoleOnly,
            ModelName::DipolePlusPhase => ForceModel::DipolePlusPhase(Order::FirstOrder),
            ModelName::DipolePlusPhaseExact => ForceModel::DipolePlusPhase(Order::Exact),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum OrderName {
    FirstOrder,
    Exact,
}

impl OrderName {
    pub fn order(self) -> Order {
        match self {
            OrderName::FirstOrder => Order::FirstOrder,
            OrderName::Exact => Order::Exact,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ClassicalSection {
    /// R₀ (m)
    pub position: f64,
    /// V₀ (m/s)
    pub velocity: f64,
    pub model: ModelName,
    /// s
    pub t_end: f64,
    pub rel_tol: f64,
    /// m; defaults to 3|R₀|.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub escape_radius: Option<f64>,
    pub samples_per_step: usize,
    pub freeze_doppler: bool,
}

impl Default for ClassicalSection {
    fn default() -> Self {
        ClassicalSection {
            position: -200e-6,
            velocity: 2000.0,
            model: ModelName::DipoleOnly,
            t_end: 1e-6,
            rel_tol: 1e-10,
            escape_radius: None,
            samples_per_step: optoforce_core::classical::DEFAULT_SAMPLES_PER_STEP,
            freeze_doppler: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SweepSection {
    /// Lowest and highest initial kinetic energy, in units of the barrier
    /// height M₀²/ħΔ.
    pub energies_over_barrier: [f64; 2],
    pub points: usize,
    pub models: Vec<ModelName>,
    pub rel_tol: f64,
    /// U(R)/KE at the launch radius.
    pub far_field_ratio: f64,
    pub freeze_doppler: bool,
    /// Energy unit for the normalised columns (J); defaults to ½m·(3400 m/s)².
    #[serde(skip_serializing_if = "Option::is_none")]
    pub normalization_energy: Option<f64>,
}

impl Default for SweepSection {
    fn default() -> Self {
        SweepSection {
            energies_over_barrier: [0.25, 6.0],
            points: 30,
            models: vec![ModelName::DipoleOnly, ModelName::DipolePlusPhase],
            rel_tol: 1e-10,
            far_field_ratio: optoforce_core::classical::FAR_FIELD_RATIO,
            freeze_doppler: false,
            normalization_energy: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct QuantumSection {
    /// m
    pub r_min: f64,
    /// m
    pub r_max: f64,
    pub n_points: usize,
    /// Packet centre R₀ (m).
    pub position: f64,
    /// V₀ (m/s)
    pub velocity: f64,
    /// Packet standard deviation (m).
    pub sigma: f64,
    /// s; defaults to (2π/|Δ|)/100.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub dt: Option<f64>,
    /// s
    pub t_end: f64,
    pub observer_stride: usize,
    /// Store a snapshot every this many records.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub snapshot_every: Option<usize>,
    /// Rotation rate Ω applied to exported snapshots (rad/s).
    #[serde(deserialize_with = "deserialize_frequency", skip_serializing_if = "Option::is_none")]
    pub snapshot_rotation: Option<f64>,
    pub counter_propagating: bool,
    /// Include the Gouy phase in the coupling, independently of `beam.gouy`.
    pub gouy: bool,
    pub norm_tolerance: f64,
    /// Half-width of the velocity smoothing window (s).
    pub smoothing_half_window: f64,
    /// Speeds are compared where ⟨R⟩ crosses ∓ this fraction of |R₀|.
    pub matched_radius_fraction: f64,
    /// Width of the Gaussian filter for the force comparison (s).
    pub force_filter_width: f64,
    /// Repeat the run with dx and dt halved and report the shifts.
    pub convergence_check: bool,
}

impl Default for QuantumSection {
    fn default() -> Self {
        QuantumSection {
            r_min: -160e-6,
            r_max: 160e-6,
            n_points: 8192,
            position: -40e-6,
            velocity: 2000.0,
            sigma: 5e-6,
            dt: None,
            t_end: 46e-9,
            observer_stride: 4,
            snapshot_every: None,
            snapshot_rotation: None,
            counter_propagating: false,
            gouy: true,
            norm_tolerance: 1e-4,
            smoothing_half_window: 1e-9,
            matched_radius_fraction: 0.8,
            force_filter_width: 0.5e-9,
            convergence_check: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct AnalyticSection {
    pub order: OrderName,
    /// Positions span ±this many Rayleigh lengths.
    pub position_span: f64,
    pub positions: usize,
    /// Largest |δω_D/Δ| in the velocity grid.
    pub max_doppler_fraction: f64,
    pub velocities: usize,
    /// Gate on |f(R, V) − f(R, 0)|/|f(R, 0)| for the first-order force.
    pub cancellation_tolerance: f64,
    /// R₀ (m) and V₀ (m/s) for the residual power-law fit.
    pub residual_position: f64,
    pub residual_velocity: f64,
    /// Detunings span one decade upward from Δ in this many points.
    pub residual_points: usize,
    pub residual_exponent: f64,
    pub residual_exponent_tolerance: f64,
}

impl Default for AnalyticSection {
    fn default() -> Self {
        AnalyticSection {
            order: OrderName::FirstOrder,
            position_span: 3.0,
            positions: 20,
            max_doppler_fraction: 0.2,
            velocities: 10,
            cancellation_tolerance: 1e-10,
            residual_position: -100e-6,
            residual_velocity: 2000.0,
            residual_points: 11,
            residual_exponent: -3.0,
            residual_exponent_tolerance: 0.3,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EnsembleSection {
    /// K
    pub temperature: f64,
    /// Atoms per chamber.
    pub n_atoms: usize,
    pub seed: u64,
    pub models: Vec<ModelName>,
    /// Kinetic-energy window in units of the barrier height.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub window_over_barrier: Option<[f64; 2]>,
    pub rel_tol: f64,
    pub freeze_doppler: bool,
}

impl Default for EnsembleSection {
    fn default() -> Self {
        EnsembleSection {
            temperature: 9.6e-3,
            n_atoms: 1000,
            seed: 42,
            models: vec![ModelName::DipoleOnly, ModelName::DipolePlusPhase],
            window_over_barrier: Some([0.5, 1.5]),
            rel_tol: 1e-9,
            freeze_doppler: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OutputSection {
    pub dir: PathBuf,
}

impl Default for OutputSection {
    fn default() -> Self {
        OutputSection { dir: PathBuf::from("out") }
    }
}

/// Where a configuration layer came from, for error messages.
#[derive(Debug, Clone)]
pub enum Layer<'a> {
    Preset(&'a str),
    File(&'a Path),
}

/// Resolve preset, file and `key=value` overrides, in that order.
pub fn load_config(path: Option<&Path>, preset: Option<&str>, overrides: &[String]) -> Result<ExperimentConfig, CliError> {
    let mut table = Table::new();
    if let Some(name) = preset {
        let text = presets::source(name).ok_or_else(|| CliError::UnknownPreset {
            name: name.to_string(),
            available: presets::NAMES.join(", "),
        })?;
        merge(&mut table, parse_layer(&text, Layer::Preset(name))?);
    }
    if let Some(p) = path {
        let text = std::fs::read_to_string(p).map_err(|e| CliError::Io {
            path: p.to_path_buf(),
            message: e.to_string(),
        })?;
        merge(&mut table, parse_layer(&text, Layer::File(p))?);
    }
    for item in overrides {
        apply_override(&mut table, item)?;
    }
    let cfg: ExperimentConfig = table.try_into().map_err(|e: toml::de::Error| CliError::Parse {
        source_name: "--set overrides".into(),
        line: None,
        column: None,
        message: e.message().to_string(),
    })?;
    cfg.validate()?;
    Ok(cfg)
}

/// Parse one layer, checking it against the schema on its own so that
/// unknown keys and type errors are reported with their line and column.
fn parse_layer(text: &str, layer: Layer<'_>) -> Result<Table, CliError> {
    let name = match layer {
        Layer::Preset(n) => format!("preset `{n}`"),
        Layer::File(p) => p.display().to_string(),
    };
    let located = |e: toml::de::Error| {
        let (line, column) = e
            .span()
            .map(|s| line_column(text, s.start))
            .map_or((None, None), |(l, c)| (Some(l), Some(c)));
        CliError::Parse {
            source_name: name.clone(),
            line,
            column,
            message: e.message().to_string(),
        }
    };
    toml::from_str::<ExperimentConfig>(text).map_err(located)?;
    toml::from_str::<Table>(text).map_err(located)
}

fn line_column(text: &str, offset: usize) -> (usize, usize) {
    let before = &text[..offset.min(text.len())];
    let line = before.matches('\n').count() + 1;
    let column = before.rsplit('\n').next().map_or(0, |l| l.chars().count()) + 1;
    (line, column)
}

pub(crate) fn merge(into: &mut Table, from: Table) {
    for (k, v) in from {
        match (into.get_mut(&k), v) {
            (Some(Value::Table(a)), Value::Table(b)) => merge(a, b),
            (_, v) => {
                into.insert(k, v);
            }
        }
    }
}

/// `section.key=value`; the value is read as a TOML value, falling back to
/// a bare string.
fn apply_override(table: &mut Table, item: &str) -> Result<(), CliError> {
    let bad = |message: String| CliError::Parse {
        source_name: format!("--set {item}"),
        line: None,
        column: None,
        message,
    };
    let (key, raw) = item
        .split_once('=')
        .ok_or_else(|| bad("expected key=value".into()))?;
    let path: Vec<&str> = key.trim().split('.').map(str::trim).collect();
    if path.iter().any(|p| p.is_empty()) {
        return Err(bad(format!("malformed key `{key}`")));
    }
    let value = match toml::from_str::<Table>(&format!("v = {}", raw.trim())) {
        Ok(mut t) => t.remove("v").unwrap_or(Value::String(raw.trim().into())),
        Err(_) => Value::String(raw.trim().into()),
    };
    // validate the key and value against the schema on their own
    let mut probe = value.clone();
    for part in path.iter().rev() {
        let mut t = Table::new();
        t.insert(part.to_string(), probe);
        probe = Value::Table(t);
    }
    let _: ExperimentConfig = probe.try_into().map_err(|e: toml::de::Error| bad(e.message().to_string()))?;

    let mut cursor = table;
    for part in &path[..path.len() - 1] {
        let entry = cursor
            .entry(part.to_string())
            .or_insert_with(|| Value::Table(Table::new()));
        cursor = entry
            .as_table_mut()
            .ok_or_else(|| bad(format!("`{part}` is not a section")))?;
    }
    cursor.insert(path[path.len() - 1].to_string(), value);
    Ok(())
}

fn required(field: &'static str, v: Option<f64>) -> Result<f64, CliError> {
    v.ok_or(CliError::Validation {
        field,
        constraint: "is required",
        value: None,
    })
}

fn positive(field: &'static str, v: f64) -> Result<(), CliError> {
    if v.is_finite() && v > 0.0 {
        Ok(())
    } else {
        Err(CliError::Validation {
            field,
            constraint: "must be finite and > 0",
            value: Some(v),
        })
    }
}

fn finite(field: &'static str, v: f64) -> Result<(), CliError> {
    if v.is_finite() {
        Ok(())
    } else {
        Err(CliError::Validation {
            field,
            constraint: "must be finite",
            value: Some(v),
        })
    }
}

fn at_least(field: &'static str, v: usize, min: usize) -> Result<(), CliError> {
    if v >= min {
        Ok(())
    } else {
        Err(CliError::Validation {
            field,
            constraint: if min == 1 { "must be >= 1" } else { "must be >= 2" },
            value: Some(v as f64),
        })
    }
}

fn ordered_pair(field: &'static str, [lo, hi]: [f64; 2]) -> Result<(), CliError> {
    positive(field, lo)?;
    if hi.is_finite() && hi > lo {
        Ok(())
    } else {
        Err(CliError::Validation {
            field,
            constraint: "upper bound must be finite and exceed the lower bound",
            value: Some(hi),
        })
    }
}

impl ExperimentConfig {
    /// Field-level checks; physics-level checks happen when the core types
    /// are built.
    pub fn validate(&self) -> Result<(), CliError> {
        let d = required("detuning", self.detuning)?;
        finite("detuning", d)?;
        if d == 0.0 {
            return Err(CliError::Validation {
                field: "detuning",
                constraint: "must be nonzero",
                value: Some(d),
            });
        }
        positive("beam.wavelength", required("beam.wavelength", self.beam.wavelength)?)?;
        positive("beam.rayleigh_length", required("beam.rayleigh_length", self.beam.rayleigh_length)?)?;
        if let Some(w) = self.beam.angular_frequency {
            positive("beam.angular_frequency", w)?;
        }
        if let Some(e) = self.beam.field_amplitude {
            positive("beam.field_amplitude", e)?;
        }
        positive("atom.mass", required("atom.mass", self.atom.mass)?)?;
        let c = required("atom.coupling_ratio", self.atom.coupling_ratio)?;
        if !(c.is_finite() && c >= 0.0) {
            return Err(CliError::Validation {
                field: "atom.coupling_ratio",
                constraint: "must be finite and >= 0",
                value: Some(c),
            });
        }
        positive("atom.lifetime", self.atom.lifetime)?;
        positive("atom.electron_mass", self.atom.electron_mass)?;
        finite("atom.electron_charge", self.atom.electron_charge)?;
        if let Some(w) = self.atom.transition_frequency {
            positive("atom.transition_frequency", w)?;
        }

        let cl = &self.classical;
        finite("classical.position", cl.position)?;
        finite("classical.velocity", cl.velocity)?;
        positive("classical.t_end", cl.t_end)?;
        positive("classical.rel_tol", cl.rel_tol)?;
        at_least("classical.samples_per_step", cl.samples_per_step, 1)?;
        if let Some(r) = cl.escape_radius {
            positive("classical.escape_radius", r)?;
        }

        let sw = &self.sweep;
        ordered_pair("sweep.energies_over_barrier", sw.energies_over_barrier)?;
        at_least("sweep.points", sw.points, 2)?;
        positive("sweep.rel_tol", sw.rel_tol)?;
        positive("sweep.far_field_ratio", sw.far_field_ratio)?;
        if let Some(e) = sw.normalization_energy {
            positive("sweep.normalization_energy", e)?;
        }

        let q = &self.quantum;
        finite("quantum.r_min", q.r_min)?;
        finite("quantum.r_max", q.r_max)?;
        if q.r_max <= q.r_min {
            return Err(CliError::Validation {
                field: "quantum.r_max",
                constraint: "must exceed quantum.r_min",
                value: Some(q.r_max),
            });
        }
        finite("quantum.position", q.position)?;
        finite("quantum.velocity", q.velocity)?;
        positive("quantum.sigma", q.sigma)?;
        if let Some(dt) = q.dt {
            positive("quantum.dt", dt)?;
        }
        positive("quantum.t_end", q.t_end)?;
        at_least("quantum.observer_stride", q.observer_stride, 1)?;
        positive("quantum.norm_tolerance", q.norm_tolerance)?;
        positive("quantum.smoothing_half_window", q.smoothing_half_window)?;
        positive("quantum.matched_radius_fraction", q.matched_radius_fraction)?;
        positive("quantum.force_filter_width", q.force_filter_width)?;

        let a = &self.analytic;
        positive("analytic.position_span", a.position_span)?;
        at_least("analytic.positions", a.positions, 2)?;
        positive("analytic.max_doppler_fraction", a.max_doppler_fraction)?;
        at_least("analytic.velocities", a.velocities, 1)?;
        positive("analytic.cancellation_tolerance", a.cancellation_tolerance)?;
        finite("analytic.residual_position", a.residual_position)?;
        finite("analytic.residual_velocity", a.residual_velocity)?;
        at_least("analytic.residual_points", a.residual_points, 2)?;
        positive("analytic.residual_exponent_tolerance", a.residual_exponent_tolerance)?;

        let e = &self.ensemble;
        positive("ensemble.temperature", e.temperature)?;
        at_least("ensemble.n_atoms", e.n_atoms, 1)?;
        positive("ensemble.rel_tol", e.rel_tol)?;
        if let Some(w) = e.window_over_barrier {
            ordered_pair("ensemble.window_over_barrier", w)?;
        }
        Ok(())
    }

    pub fn detuning(&self) -> f64 {
        self.detuning.unwrap_or(f64::NAN)
    }

    /// ω_L, defaulting to 2πc/λ.
    pub fn laser_frequency(&self) -> f64 {
        self.beam.angular_frequency.unwrap_or_else(|| {
            std::f64::consts::TAU * SPEED_OF_LIGHT / self.beam.wavelength.unwrap_or(f64::NAN)
        })
    }

    pub fn beam_config(&self) -> Result<BeamConfig, CliError> {
        let mut b = BeamConfig::new(
            self.beam.wavelength.unwrap_or(f64::NAN),
            self.beam.rayleigh_length.unwrap_or(f64::NAN),
            self.laser_frequency(),
        )?
        .with_gouy(self.beam.gouy);
        if let Some(e0) = self.beam.field_amplitude {
            b = b.with_field_amplitude(e0);
        }
        Ok(b)
    }

    pub fn atom_config(&self) -> AtomConfig {
        let delta = self.detuning();
        AtomConfig {
            mass: self.atom.mass.unwrap_or(f64::NAN),
            transition_frequency: self
                .atom
                .transition_frequency
                .unwrap_or_else(|| self.laser_frequency() - delta),
            coupling: self.atom.coupling_ratio.unwrap_or(f64::NAN) * HBAR * delta.abs(),
            lifetime: self.atom.lifetime,
            electron_mass: self.atom.electron_mass,
            electron_charge: self.atom.electron_charge,
        }
    }

    pub fn interaction(&self) -> Result<Interaction, CliError> {
        Ok(Interaction::new(self.atom_config(), self.beam_config()?, self.detuning())?)
    }

    /// Fill every defaulted quantity so the serialised form is complete.
    pub fn resolved(&self) -> ExperimentConfig {
        let mut c = self.clone();
        c.beam.angular_frequency = Some(self.laser_frequency());
        c.atom.transition_frequency = Some(self.atom_config().transition_frequency);
        c
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("configuration is always representable in TOML")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn line_column_of_offset() {
        let t = "a = 1\nbb = 2\n";
        assert_eq!(line_column(t, 0), (1, 1));
        assert_eq!(line_column(t, 6), (2, 1));
        assert_eq!(line_column(t, 9), (2, 4));
    }

    #[test]
    fn merge_is_deep() {
        let mut a: Table = toml::from_str("[beam]\nwavelength = 1.0\ngouy = true\n").unwrap();
        let b: Table = toml::from_str("[beam]\nwavelength = 2.0\n").unwrap();
        merge(&mut a, b);
        assert_eq!(a["beam"]["wavelength"].as_float(), Some(2.0));
        assert_eq!(a["beam"]["gouy"].as_bool(), Some(true));
    }
}
