use std::f64::consts::TAU;
use std::io::{self, Write};
use std::sync::Arc;

use num_complex::Complex64;
use optoforce_core::constants::HBAR;
use optoforce_core::Interaction;
use rustfft::{Fft, FftPlanner};

use crate::error::{check_positive, Error, Result};
use crate::grid::SpatialGrid;
use crate::state::{mean_rest_force, observables, Observables, QuantumState};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EvolveOptions {
    pub dt: f64,
    pub t_end: f64,
    /// Record observables every this many steps.
    pub observer_stride: usize,
    /// Keep a copy of the state every this many records.
    pub snapshot_every: Option<usize>,
    /// Largest tolerated |N(t)/N(0) − 1|.
    pub norm_tolerance: f64,
    /// Width of the guard zone at each edge (m); defaults to twice the
    /// initial packet width.
    pub edge_zone: Option<f64>,
    /// Largest tolerated norm fraction inside the guard zone.
    pub edge_tolerance: f64,
    /// Beam travelling toward −R: the spatial phase k R − g(R) is negated.
    pub counter_propagating: bool,
}

impl EvolveOptions {
    pub fn new(dt: f64, t_end: f64, observer_stride: usize) -> Self {
        EvolveOptions {
            dt,
            t_end,
            observer_stride,
            snapshot_every: None,
            norm_tolerance: 1e-4,
            edge_zone: None,
            edge_tolerance: 1e-8,
            counter_propagating: false,
        }
    }
}

/// Observables recorded along a run.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct ObservableSeries {
    pub times: Vec<f64>,
    pub norm: Vec<f64>,
    pub mean_position: Vec<f64>,
    pub width: Vec<f64>,
    pub excited_population: Vec<f64>,
    /// Density-weighted velocity-independent analytic force (N).
    pub mean_rest_force: Vec<f64>,
    /// Interior times `times[1..len−1]` at which `velocity` is defined.
    pub velocity_times: Vec<f64>,
    /// Centred differences of ⟨R⟩ (m/s); length `len − 2`.
    pub velocity: Vec<f64>,
    /// ½ m velocity² (J).
    pub kinetic_energy: Vec<f64>,
}

impl ObservableSeries {
    fn push(&mut self, o: &Observables, force: f64) {
        self.times.push(o.t);
        self.norm.push(o.norm);
        self.mean_position.push(o.mean_position);
        self.width.push(o.width);
        self.excited_population.push(o.excited_population);
        self.mean_rest_force.push(force);
    }

    fn finish(&mut self, mass: f64) {
        let n = self.times.len();
        self.velocity_times.clear();
        self.velocity.clear();
        self.kinetic_energy.clear();
        for i in 1..n.saturating_sub(1) {
            let v = (self.mean_position[i + 1] - self.mean_position[i - 1])
                / (self.times[i + 1] - self.times[i - 1]);
            self.velocity_times.push(self.times[i]);
            self.velocity.push(v);
            self.kinetic_energy.push(0.5 * mass * v * v);
        }
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    /// Largest |N(t)/N(0) − 1|.
    pub fn max_norm_drift(&self) -> f64 {
        let n0 = self.norm[0];
        self.norm.iter().fold(0.0f64, |m, n| m.max((n / n0 - 1.0).abs()))
    }

    /// ⟨R⟩ and its first two derivatives from local quadratic fits over
    /// ±`half_window`, at every record whose window lies inside the series.
    ///
    /// A window spanning several detuning periods averages out the fast
    /// ripple that coherence between the dressed states puts on ⟨R⟩.
    pub fn smoothed(&self, half_window: f64) -> Vec<SmoothedPoint> {
        let n = self.len();
        if n == 0 {
            return Vec::new();
        }
        let (t0, t1) = (self.times[0], self.times[n - 1]);
        self.times
            .iter()
            .filter(|&&t| t - half_window >= t0 && t + half_window <= t1)
            .filter_map(|&t| quadratic_fit(&self.times, &self.mean_position, t, half_window))
            .collect()
    }

    /// Smoothed velocity where the smoothed ⟨R⟩ first crosses `position`
    /// moving in the direction of `direction`, searching from `start`.
    pub fn smoothed_velocity_at(
        points: &[SmoothedPoint],
        position: f64,
        direction: f64,
        start: usize,
    ) -> Option<(usize, f64)> {
        for i in start..points.len().saturating_sub(1) {
            let (a, b) = (points[i].position - position, points[i + 1].position - position);
            let crosses = if direction > 0.0 { a < 0.0 && b >= 0.0 } else { a > 0.0 && b <= 0.0 };
            if crosses {
                let s = a / (a - b);
                return Some((i, points[i].velocity + s * (points[i + 1].velocity - points[i].velocity)));
            }
        }
        None
    }

    /// Smoothed speeds (incoming, outgoing) where ⟨R⟩ passes −`radius` and
    /// then +`radius` along the direction of `direction`, the two points an
    /// equal distance either side of the focus.
    pub fn matched_speeds(&self, radius: f64, direction: f64, half_window: f64) -> Option<(f64, f64)> {
        let pts = self.smoothed(half_window);
        let d = direction.signum();
        let (i, v_in) = Self::smoothed_velocity_at(&pts, -d * radius, d, 0)?;
        let (_, v_out) = Self::smoothed_velocity_at(&pts, d * radius, d, i + 1)?;
        Some((v_in.abs(), v_out.abs()))
    }

    /// Gaussian low-pass of `m·d²⟨R⟩/dt²` and of the density-weighted rest
    /// force, with the same kernel of width `sigma_t` on both sides.
    ///
    /// Convolution commutes with differentiation, so the acceleration is the
    /// position series convolved with the kernel's second derivative and the
    /// two filtered series are directly comparable. Only records at least
    /// five widths from either end are returned.
    pub fn filtered_force_comparison(&self, mass: f64, sigma_t: f64) -> Vec<FilteredForce> {
        let n = self.len();
        let mut out = Vec::new();
        if n < 3 {
            return out;
        }
        let reach = 5.0 * sigma_t;
        let (t0, t1) = (self.times[0], self.times[n - 1]);
        for i in 0..n {
            let tc = self.times[i];
            if tc - reach < t0 || tc + reach > t1 {
                continue;
            }
            let lo = self.times.partition_point(|&t| t < tc - reach);
            let hi = self.times.partition_point(|&t| t <= tc + reach);
            // Kernel weights K·dt and their discrete moments Σ K·dt·uᵖ.
            let mut kw = Vec::with_capacity(hi - lo);
            let mut m = [0.0; 5];
            for j in lo..hi {
                // trapezoid weights on a possibly uneven final interval
                let left = if j > 0 { self.times[j] - self.times[j - 1] } else { 0.0 };
                let right = if j + 1 < n { self.times[j + 1] - self.times[j] } else { 0.0 };
                let u = (self.times[j] - tc) / sigma_t;
                let k = (-0.5 * u * u).exp() * 0.5 * (left + right);
                let mut up = 1.0;
                for mp in &mut m {
                    *mp += k * up;
                    up *= u;
                }
                kw.push((u, k));
            }
            // (c₀ + c₁u + c₂u²)K stands in for K'' = (u² − 1)K/σ². The
            // coefficients make the discrete sums annihilate 1 and t and
            // return exactly 1 for t²/2; truncated tails and a one-sample
            // asymmetry would otherwise leak ⟨R⟩ and d⟨R⟩/dt into the result.
            let Some(c) = solve3(
                [[m[0], m[1], m[2]], [m[1], m[2], m[3]], [m[2], m[3], m[4]]],
                [0.0, 0.0, 2.0 / (sigma_t * sigma_t)],
            ) else {
                continue;
            };
            let r_ref = self.mean_position[i];
            let (mut acc, mut force, mut pe) = (0.0, 0.0, 0.0);
            for (off, &(u, k)) in kw.iter().enumerate() {
                let j = lo + off;
                acc += (c[0] + c[1] * u + c[2] * u * u) * k * (self.mean_position[j] - r_ref);
                force += k * self.mean_rest_force[j];
                pe += k * self.excited_population[j];
            }
            let wsum = m[0];
            let acc = acc * wsum;
            out.push(FilteredForce {
                t: tc,
                mass_times_acceleration: mass * acc / wsum,
                rest_force: force / wsum,
                excited_population: pe / wsum,
            });
        }
        out
    }
}

/// One record of [`ObservableSeries::filtered_force_comparison`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FilteredForce {
    pub t: f64,
    pub mass_times_acceleration: f64,
    pub rest_force: f64,
    pub excited_population: f64,
}

/// Position, velocity and acceleration from a local quadratic fit.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SmoothedPoint {
    pub t: f64,
    pub position: f64,
    pub velocity: f64,
    pub acceleration: f64,
}

/// Weighted least-squares parabola through the records with
/// |t − t_c| ≤ `half_window`, evaluated at t_c. The Hann weight cos²(πτ/2)
/// suppresses leakage from oscillations much faster than the window.
/// Returns `None` if fewer than five records fall inside.
fn quadratic_fit(times: &[f64], values: &[f64], tc: f64, half_window: f64) -> Option<SmoothedPoint> {
    // moments of τ = (t − t_c)/half_window, for a well-conditioned 3×3 system
    let mut s = [0.0f64; 5];
    let mut b = [0.0f64; 3];
    let mut count = 0;
    let lo = times.partition_point(|&t| t < tc - half_window);
    for i in lo..times.len() {
        let tau = (times[i] - tc) / half_window;
        if tau > 1.0 {
            break;
        }
        let c = (0.5 * std::f64::consts::PI * tau).cos();
        let mut p = c * c;
        for (k, sk) in s.iter_mut().enumerate() {
            *sk += p;
            if k < 3 {
                b[k] += p * values[i];
            }
            p *= tau;
        }
        count += 1;
    }
    if count < 5 {
        return None;
    }
    let [c0, c1, c2] = solve3([[s[0], s[1], s[2]], [s[1], s[2], s[3]], [s[2], s[3], s[4]]], b)?;
    Some(SmoothedPoint {
        t: tc,
        position: c0,
        velocity: c1 / half_window,
        acceleration: 2.0 * c2 / (half_window * half_window),
    })
}

/// Cramer's rule for a 3×3 system; `None` if it is singular.
fn solve3(m: [[f64; 3]; 3], b: [f64; 3]) -> Option<[f64; 3]> {
    let det = |m: &[[f64; 3]; 3]| {
        m[0][0] * (m[1][1] * m[2][2] - m[1][2] * m[2][1]) - m[0][1] * (m[1][0] * m[2][2] - m[1][2] * m[2][0])
            + m[0][2] * (m[1][0] * m[2][1] - m[1][1] * m[2][0])
    };
    let d = det(&m);
    if d == 0.0 || !d.is_finite() {
        return None;
    }
    let col = |c: usize| {
        let mut mc = m;
        for r in 0..3 {
            mc[r][c] = b[r];
        }
        det(&mc) / d
    };
    Some([col(0), col(1), col(2)])
}

/// Stored amplitudes at one record time.
#[derive(Debug, Clone, PartialEq)]
pub struct Snapshot {
    pub t: f64,
    pub psi_g: Vec<Complex64>,
    pub psi_e: Vec<Complex64>,
}

impl Snapshot {
    /// Both amplitudes multiplied by exp(iΩt). A display transform only;
    /// it changes no density.
    pub fn rotated(&self, omega: f64) -> Snapshot {
        let w = Complex64::from_polar(1.0, omega * self.t);
        Snapshot {
            t: self.t,
            psi_g: self.psi_g.iter().map(|z| z * w).collect(),
            psi_e: self.psi_e.iter().map(|z| z * w).collect(),
        }
    }

    /// CSV dump: R, Re/Im ψ′_G, Re/Im ψ′_E.
    pub fn write_csv<W: Write>(&self, grid: &SpatialGrid, mut w: W) -> io::Result<()> {
        writeln!(
            w,
            "# R(m), re_psi_g(m^-1/2), im_psi_g(m^-1/2), re_psi_e(m^-1/2), im_psi_e(m^-1/2)"
        )?;
        for j in 0..grid.n_points {
            let (g, e) = (self.psi_g[j], self.psi_e[j]);
            writeln!(w, "{:e},{:e},{:e},{:e},{:e}", grid.position(j), g.re, g.im, e.re, e.im)?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct Evolution {
    pub series: ObservableSeries,
    pub snapshots: Vec<Snapshot>,
    pub state: QuantumState,
    pub steps: usize,
    /// ∫ P_E dt / τ, the expected number of spontaneous photons.
    pub expected_scattered_photons: f64,
    /// Largest norm fraction seen in the edge guard zone.
    pub max_edge_mass: f64,
}

struct Propagator {
    fft: Arc<dyn Fft<f64>>,
    ifft: Arc<dyn Fft<f64>>,
    scratch: Vec<Complex64>,
    /// exp(−iħk²τ/2m)/N for τ = dt/2 and τ = dt.
    half: Vec<Complex64>,
    full: Vec<Complex64>,
    cos_theta: Vec<f64>,
    sin_theta: Vec<f64>,
    /// exp(i[kR − g(R)]).
    spatial: Vec<Complex64>,
    detuning: f64,
    dt: f64,
}

impl Propagator {
    fn new(grid: &SpatialGrid, it: &Interaction, dt: f64, direction: f64) -> Self {
        let n = grid.n_points;
        let mut planner = FftPlanner::new();
        let fft = planner.plan_fft_forward(n);
        let ifft = planner.plan_fft_inverse(n);
        let scratch_len = fft.get_inplace_scratch_len().max(ifft.get_inplace_scratch_len());
        let mass = it.atom.mass;
        let inv_n = 1.0 / n as f64;
        let kinetic = |tau: f64| -> Vec<Complex64> {
            grid.wavenumbers()
                .iter()
                .map(|k| Complex64::from_polar(inv_n, -HBAR * k * k * tau / (2.0 * mass)))
                .collect()
        };
        let m0 = it.atom.coupling;
        let positions = grid.positions();
        let theta: Vec<f64> = positions.iter().map(|&r| m0 * it.beam.envelope(r) * dt / HBAR).collect();
        Propagator {
            fft,
            ifft,
            scratch: vec![Complex64::new(0.0, 0.0); scratch_len],
            half: kinetic(0.5 * dt),
            full: kinetic(dt),
            cos_theta: theta.iter().map(|t| t.cos()).collect(),
            sin_theta: theta.iter().map(|t| t.sin()).collect(),
            spatial: positions
                .iter()
                .map(|&r| Complex64::from_polar(1.0, direction * it.beam.spatial_phase(r)))
                .collect(),
            detuning: it.detuning,
            dt,
        }
    }

    fn kinetic(&mut self, state: &mut QuantumState, full: bool) {
        let phase = if full { &self.full } else { &self.half };
        for psi in [&mut state.psi_g, &mut state.psi_e] {
            self.fft.process_with_scratch(psi, &mut self.scratch);
            for (z, p) in psi.iter_mut().zip(phase) {
                *z *= p;
            }
            self.ifft.process_with_scratch(psi, &mut self.scratch);
        }
    }

    /// Exact exp(−iH_c dt/ħ) with the coupling frozen at `t_mid`.
    fn coupling(&self, state: &mut QuantumState, t_mid: f64) {
        let w = Complex64::from_polar(1.0, -self.detuning * t_mid);
        let minus_i = Complex64::new(0.0, -1.0);
        for j in 0..state.psi_g.len() {
            let c = self.cos_theta[j];
            let s = self.sin_theta[j];
            let u = self.spatial[j] * w;
            let (g, e) = (state.psi_g[j], state.psi_e[j]);
            state.psi_g[j] = g * c + minus_i * s * u.conj() * e;
            state.psi_e[j] = minus_i * s * u * g + e * c;
        }
    }

    /// `steps` Strang steps with the interior kinetic half steps fused.
    fn advance(&mut self, state: &mut QuantumState, steps: usize) {
        if steps == 0 {
            return;
        }
        self.kinetic(state, false);
        for b in 0..steps {
            self.coupling(state, state.t + (b as f64 + 0.5) * self.dt);
            self.kinetic(state, b + 1 < steps);
        }
        state.t += steps as f64 * self.dt;
    }
}

fn edge_mass(state: &QuantumState, grid: &SpatialGrid, zone: f64) -> f64 {
    let m = ((zone / grid.dx()).ceil() as usize).min(grid.n_points / 2);
    let n = grid.n_points;
    let dens = |j: usize| state.psi_g[j].norm_sqr() + state.psi_e[j].norm_sqr();
    let total: f64 = (0..n).map(dens).sum();
    let edge: f64 = (0..m).chain(n - m..n).map(dens).sum();
    edge / total
}

/// Propagate `state` to `opts.t_end`.
pub fn evolve(
    mut state: QuantumState,
    grid: &SpatialGrid,
    it: &Interaction,
    opts: &EvolveOptions,
) -> Result<Evolution> {
    check_positive("dt", opts.dt)?;
    check_positive("t_end", opts.t_end)?;
    if opts.observer_stride == 0 {
        return Err(Error::InvalidParameter {
            name: "observer_stride",
            constraint: "must be >= 1",
            value: 0.0,
        });
    }
    if state.psi_g.len() != grid.n_points || state.psi_e.len() != grid.n_points {
        return Err(Error::InvalidParameter {
            name: "state",
            constraint: "length must equal grid.n_points",
            value: state.psi_g.len() as f64,
        });
    }
    let detuning_limit = 0.02 * TAU / it.detuning.abs();
    if opts.dt > detuning_limit {
        return Err(Error::TimeStep {
            dt: opts.dt,
            limit: detuning_limit,
            bound: "detuning period",
        });
    }
    let kinetic_limit = 0.5 * 2.0 * it.atom.mass * grid.dx() * grid.dx() / HBAR;
    if opts.dt > kinetic_limit {
        return Err(Error::TimeStep {
            dt: opts.dt,
            limit: kinetic_limit,
            bound: "kinetic",
        });
    }

    let first = observables(&state, grid);
    let zone = opts.edge_zone.unwrap_or(2.0 * first.width);
    let n0 = first.norm;
    let mut series = ObservableSeries::default();
    let mut snapshots = Vec::new();
    let mut max_edge_mass = 0.0f64;
    let mut photons = 0.0;
    let mut records = 0usize;

    let mut record = |state: &QuantumState,
                      o: Observables,
                      series: &mut ObservableSeries,
                      snapshots: &mut Vec<Snapshot>|
     -> Result<()> {
        let drift = (o.norm / n0 - 1.0).abs();
        if drift > opts.norm_tolerance {
            return Err(Error::NormDrift {
                t: o.t,
                drift,
                limit: opts.norm_tolerance,
            });
        }
        let edge = edge_mass(state, grid, zone);
        max_edge_mass = max_edge_mass.max(edge);
        if edge > opts.edge_tolerance {
            return Err(Error::EdgeContact { t: o.t, mass: edge });
        }
        if let Some(&t_prev) = series.times.last() {
            let pe_prev = *series.excited_population.last().unwrap();
            photons += 0.5 * (pe_prev + o.excited_population) * (o.t - t_prev) / it.atom.lifetime;
        }
        if let Some(every) = opts.snapshot_every {
            if every > 0 && records % every == 0 {
                snapshots.push(Snapshot {
                    t: state.t,
                    psi_g: state.psi_g.clone(),
                    psi_e: state.psi_e.clone(),
                });
            }
        }
        records += 1;
        series.push(&o, mean_rest_force(state, grid, it));
        Ok(())
    };
    record(&state, first, &mut series, &mut snapshots)?;

    let n_steps = (opts.t_end / opts.dt - 1e-9).ceil().max(1.0) as usize;
    let mut prop = Propagator::new(grid, it, opts.dt, if opts.counter_propagating { -1.0 } else { 1.0 });
    let mut done = 0;
    while done < n_steps {
        let block = opts.observer_stride.min(n_steps - done);
        prop.advance(&mut state, block);
        done += block;
        state.t = done as f64 * opts.dt;
        let o = observables(&state, grid);
        record(&state, o, &mut series, &mut snapshots)?;
    }
    series.finish(it.atom.mass);
    Ok(Evolution {
        series,
        snapshots,
        state,
        steps: n_steps,
        expected_scattered_photons: photons,
        max_edge_mass,
    })
}
