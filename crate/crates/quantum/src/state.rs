use num_complex::Complex64;
use optoforce_core::constants::HBAR;
use optoforce_core::Interaction;

use crate::error::{check_positive, Error, Result};
use crate::grid::SpatialGrid;

/// Packet centres must sit this many standard deviations inside the grid.
pub const GUARD_SIGMAS: f64 = 10.0;

/// Interaction-picture amplitudes ψ′_G, ψ′_E on the grid at time `t`.
#[derive(Debug, Clone, PartialEq)]
pub struct QuantumState {
    pub psi_g: Vec<Complex64>,
    pub psi_e: Vec<Complex64>,
    pub t: f64,
}

impl QuantumState {
    pub fn norm(&self, grid: &SpatialGrid) -> f64 {
        let s: f64 = self
            .psi_g
            .iter()
            .zip(&self.psi_e)
            .map(|(g, e)| g.norm_sqr() + e.norm_sqr())
            .sum();
        s * grid.dx()
    }
}

/// Ground-state Gaussian ∝ exp(−(R−R₀)²/4σ²)·exp(i m V₀ R/ħ), normalised so
/// that Σ|ψ|²dx = 1 and the density has standard deviation σ.
pub fn init_gaussian_packet(
    r0: f64,
    v0: f64,
    sigma: f64,
    mass: f64,
    grid: &SpatialGrid,
) -> Result<QuantumState> {
    check_positive("packet.sigma", sigma)?;
    check_positive("atom.mass", mass)?;
    if !r0.is_finite() || !v0.is_finite() {
        return Err(Error::InvalidParameter {
            name: "packet.r0",
            constraint: "position and velocity must be finite",
            value: r0,
        });
    }
    let margin = GUARD_SIGMAS * sigma;
    if r0 - margin < grid.r_min || r0 + margin > grid.r_max {
        return Err(Error::GridTooSmall {
            r_min: grid.r_min,
            r_max: grid.r_max,
            center: r0,
            margin,
        });
    }
    let k0 = mass * v0 / HBAR;
    let mut psi_g: Vec<Complex64> = grid
        .positions()
        .into_iter()
        .map(|r| {
            let d = r - r0;
            // carrier phase measured from R₀ keeps the argument small
            Complex64::from_polar((-d * d / (4.0 * sigma * sigma)).exp(), k0 * d)
        })
        .collect();
    let n: f64 = psi_g.iter().map(|z| z.norm_sqr()).sum::<f64>() * grid.dx();
    let s = 1.0 / n.sqrt();
    for z in &mut psi_g {
        *z *= s;
    }
    Ok(QuantumState {
        psi_e: vec![Complex64::new(0.0, 0.0); grid.n_points],
        psi_g,
        t: 0.0,
    })
}

/// Single-time expectation values.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Observables {
    pub t: f64,
    pub norm: f64,
    /// ⟨R⟩ over both components (m).
    pub mean_position: f64,
    /// Standard deviation of the total density (m).
    pub width: f64,
    /// Σ|ψ′_E|²dx / N.
    pub excited_population: f64,
}

pub fn observables(state: &QuantumState, grid: &SpatialGrid) -> Observables {
    let dx = grid.dx();
    let (mut n, mut s1, mut s2, mut ne) = (0.0, 0.0, 0.0, 0.0);
    for j in 0..grid.n_points {
        let r = grid.position(j);
        let pe = state.psi_e[j].norm_sqr();
        let p = state.psi_g[j].norm_sqr() + pe;
        n += p;
        s1 += p * r;
        s2 += p * r * r;
        ne += pe;
    }
    let mean = s1 / n;
    let var = (s2 / n - mean * mean).max(0.0);
    Observables {
        t: state.t,
        norm: n * dx,
        mean_position: mean,
        width: var.sqrt(),
        excited_population: ne / n,
    }
}

/// Density-weighted velocity-independent force ⟨f_rest(R)⟩ (N).
pub fn mean_rest_force(state: &QuantumState, grid: &SpatialGrid, it: &Interaction) -> f64 {
    let (mut n, mut f) = (0.0, 0.0);
    for j in 0..grid.n_points {
        let p = state.psi_g[j].norm_sqr() + state.psi_e[j].norm_sqr();
        n += p;
        f += p * it.rest_force(grid.position(j));
    }
    f / n
}

#[cfg(test)]
mod tests {
    use super::*;

    const MASS: f64 = 3.3e-31;

    fn grid() -> SpatialGrid {
        SpatialGrid::new(-100e-6, 100e-6, 4096).unwrap()
    }

    #[test]
    fn gaussian_moments() {
        let g = grid();
        let s = init_gaussian_packet(-40e-6, 2000.0, 5e-6, MASS, &g).unwrap();
        let o = observables(&s, &g);
        assert!((o.norm - 1.0).abs() < 1e-12);
        assert!((o.mean_position + 40e-6).abs() < 1e-8 * 40e-6);
        assert!((o.width - 5e-6).abs() < 1e-6 * 5e-6);
        assert_eq!(o.excited_population, 0.0);
    }

    #[test]
    fn mean_momentum_is_m_v0() {
        let g = grid();
        let s = init_gaussian_packet(-40e-6, 2000.0, 5e-6, MASS, &g).unwrap();
        let mut buf = s.psi_g.clone();
        rustfft::FftPlanner::new().plan_fft_forward(g.n_points).process(&mut buf);
        let k = g.wavenumbers();
        let (mut num, mut den) = (0.0, 0.0);
        for (z, k) in buf.iter().zip(&k) {
            num += z.norm_sqr() * k;
            den += z.norm_sqr();
        }
        let p = HBAR * num / den;
        assert!((p - MASS * 2000.0).abs() < 1e-8 * MASS * 2000.0);
    }

    #[test]
    fn symmetric_packet_centred() {
        let g = grid();
        let s = init_gaussian_packet(0.0, 0.0, 3e-6, MASS, &g).unwrap();
        assert!(observables(&s, &g).mean_position.abs() < 1e-18);
    }

    #[test]
    fn packet_must_fit() {
        let g = grid();
        assert!(matches!(
            init_gaussian_packet(-60e-6, 0.0, 5e-6, MASS, &g),
            Err(Error::GridTooSmall { .. })
        ));
    }
}
