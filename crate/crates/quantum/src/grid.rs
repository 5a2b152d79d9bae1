use std::f64::consts::{PI, TAU};

use optoforce_core::constants::PLANCK;

use crate::error::{check_positive, Error, Result};

/// Uniform periodic grid `R_j = R_min + j·dx`, `j = 0..n`, with
/// `dx = (R_max − R_min)/n`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SpatialGrid {
    pub r_min: f64,
    pub r_max: f64,
    pub n_points: usize,
}

impl SpatialGrid {
    pub fn new(r_min: f64, r_max: f64, n_points: usize) -> Result<Self> {
        if !(r_min.is_finite() && r_max.is_finite() && r_max > r_min) {
            return Err(Error::InvalidParameter {
                name: "grid.r_max",
                constraint: "must be finite and greater than grid.r_min",
                value: r_max,
            });
        }
        if n_points < 16 {
            return Err(Error::InvalidParameter {
                name: "grid.n_points",
                constraint: "must be at least 16",
                value: n_points as f64,
            });
        }
        Ok(SpatialGrid { r_min, r_max, n_points })
    }

    pub fn length(&self) -> f64 {
        self.r_max - self.r_min
    }

    pub fn dx(&self) -> f64 {
        self.length() / self.n_points as f64
    }

    pub fn dk(&self) -> f64 {
        TAU / self.length()
    }

    pub fn position(&self, j: usize) -> f64 {
        self.r_min + j as f64 * self.dx()
    }

    pub fn positions(&self) -> Vec<f64> {
        (0..self.n_points).map(|j| self.position(j)).collect()
    }

    /// Angular wavenumbers in FFT order: 0, dk, …, then the negative half.
    pub fn wavenumbers(&self) -> Vec<f64> {
        let n = self.n_points;
        let dk = self.dk();
        (0..n)
            .map(|j| {
                let m = if j < n.div_ceil(2) { j as f64 } else { j as f64 - n as f64 };
                m * dk
            })
            .collect()
    }

    /// Largest representable wavenumber π/dx.
    pub fn k_max(&self) -> f64 {
        PI / self.dx()
    }

    /// Require dx ≤ min(λ_dB, λ)/20 for an atom of `mass` moving at `speed`.
    pub fn check_resolution(&self, mass: f64, speed: f64, wavelength: f64) -> Result<()> {
        check_positive("atom.mass", mass)?;
        check_positive("beam.wavelength", wavelength)?;
        let de_broglie = if speed == 0.0 {
            f64::INFINITY
        } else {
            PLANCK / (mass * speed.abs())
        };
        let limit = de_broglie.min(wavelength) / 20.0;
        if self.dx() > limit {
            return Err(Error::GridTooCoarse { dx: self.dx(), limit });
        }
        Ok(())
    }

    /// The same domain with twice the points.
    pub fn refined(&self) -> Self {
        SpatialGrid {
            n_points: 2 * self.n_points,
            ..*self
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn spacing_and_wavenumbers() {
        let g = SpatialGrid::new(-1.0, 1.0, 8).err();
        assert!(g.is_some());
        let g = SpatialGrid::new(-1.0, 1.0, 16).unwrap();
        assert_eq!(g.dx(), 0.125);
        assert_eq!(g.position(0), -1.0);
        assert_eq!(g.position(8), 0.0);
        let k = g.wavenumbers();
        assert_eq!(k[0], 0.0);
        assert_eq!(k[1], g.dk());
        assert_eq!(k[7], 7.0 * g.dk());
        assert_eq!(k[8], -8.0 * g.dk());
        assert_eq!(k[15], -g.dk());
    }

    #[test]
    fn resolution_rule() {
        let g = SpatialGrid::new(-100e-6, 100e-6, 4096).unwrap();
        // λ_dB ≈ 1.0 µm for 3.3e-31 kg at 2 km/s, so dx must be ≤ 50 nm
        assert!(g.check_resolution(3.3e-31, 2000.0, 2e-6).is_ok());
        let coarse = SpatialGrid::new(-100e-6, 100e-6, 2048).unwrap();
        assert!(matches!(
            coarse.check_resolution(3.3e-31, 2000.0, 2e-6),
            Err(Error::GridTooCoarse { .. })
        ));
    }
}
