//! On-axis field of a focused Gaussian beam in the paraxial approximation.
//!
//! Along the propagation axis the complex field amplitude is
//!
//! ```text
//! E(R, t) = ½ E₀ F(R) exp(i [k R − g(R) − ω t])
//! F(R)    = 1 / √(1 + (R/L)²)
//! g(R)    = atan(R/L)
//! ```
//!
//! with `L` the Rayleigh length. The physical field is the phasor plus its
//! complex conjugate, so its peak amplitude at the focus is `E₀`.

use core::f64::consts::TAU;

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::math;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BeamConfig {
    /// Vacuum wavelength λ (m).
    pub wavelength: f64,
    /// Rayleigh length L (m).
    pub rayleigh_length: f64,
    /// Laser angular frequency ω_L (rad/s).
    pub angular_frequency: f64,
    /// Peak field amplitude E₀ (V/m). When unset, phasors are unit-normalised.
    pub field_amplitude: Option<f64>,
    /// Include the Gouy phase in the field phase.
    pub gouy_enabled: bool,
}

impl BeamConfig {
    pub fn new(wavelength: f64, rayleigh_length: f64, angular_frequency: f64) -> Result<Self> {
        let cfg = BeamConfig {
            wavelength,
            rayleigh_length,
            angular_frequency,
            field_amplitude: None,
            gouy_enabled: false,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        Error::check_positive("beam.wavelength", self.wavelength)?;
        Error::check_positive("beam.rayleigh_length", self.rayleigh_length)?;
        Error::check_positive("beam.angular_frequency", self.angular_frequency)?;
        if let Some(e0) = self.field_amplitude {
            Error::check_positive("beam.field_amplitude", e0)?;
        }
        Ok(())
    }

    pub fn with_gouy(mut self, enabled: bool) -> Self {
        self.gouy_enabled = enabled;
        self
    }

    pub fn with_field_amplitude(mut self, e0: f64) -> Self {
        self.field_amplitude = Some(e0);
        self
    }

    /// Wavevector k = 2π/λ (rad/m).
    #[inline]
    pub fn wavevector(&self) -> f64 {
        TAU / self.wavelength
    }

    /// E₀, or 1 when no amplitude is configured.
    #[inline]
    pub fn amplitude(&self) -> f64 {
        self.field_amplitude.unwrap_or(1.0)
    }

    /// Envelope F(R).
    #[inline]
    pub fn envelope(&self, r: f64) -> f64 {
        let x = r / self.rayleigh_length;
        1.0 / math::sqrt(1.0 + x * x)
    }

    /// dF/dR = −(R/L²) F³.
    #[inline]
    pub fn envelope_derivative(&self, r: f64) -> f64 {
        let f = self.envelope(r);
        -(r / (self.rayleigh_length * self.rayleigh_length)) * f * f * f
    }

    /// (1/F) dF/dR = −R / (L² + R²).
    #[inline]
    pub fn log_envelope_derivative(&self, r: f64) -> f64 {
        let l = self.rayleigh_length;
        -r / (l * l + r * r)
    }

    /// Gouy phase g(R) = atan(R/L), or 0 when disabled.
    #[inline]
    pub fn gouy_phase(&self, r: f64) -> f64 {
        if self.gouy_enabled {
            math::atan(r / self.rayleigh_length)
        } else {
            0.0
        }
    }

    /// dg/dR = L / (L² + R²), or 0 when disabled.
    #[inline]
    pub fn gouy_phase_derivative(&self, r: f64) -> f64 {
        if self.gouy_enabled {
            let l = self.rayleigh_length;
            l / (l * l + r * r)
        } else {
            0.0
        }
    }

    /// Local phase gradient k − dg/dR seen by an atom on the axis.
    #[inline]
    pub fn local_wavevector(&self, r: f64) -> f64 {
        self.wavevector() - self.gouy_phase_derivative(r)
    }

    /// Spatial part of the field phase, k R − g(R).
    #[inline]
    pub fn spatial_phase(&self, r: f64) -> f64 {
        self.wavevector() * r - self.gouy_phase(r)
    }

    /// Complex field phasor ½E₀F(R)exp(i[kR − g(R) − ω_L t]) in V/m.
    pub fn field_phasor(&self, r: f64, t: f64) -> Complex64 {
        let phase = self.spatial_phase(r) - self.angular_frequency * t;
        Complex64::from_polar(0.5 * self.amplitude() * self.envelope(r), phase)
    }

    /// ∂/∂R of [`field_phasor`](Self::field_phasor) in V/m².
    ///
    /// Equal to the phasor times `i(k − g') + F'/F`.
    pub fn field_gradient_phasor(&self, r: f64, t: f64) -> Complex64 {
        self.field_phasor(r, t) * self.gradient_factor(r)
    }

    /// The logarithmic derivative of the phasor, `i(k − g'(R)) + F'/F`.
    #[inline]
    pub fn gradient_factor(&self, r: f64) -> Complex64 {
        Complex64::new(self.log_envelope_derivative(r), self.local_wavevector(r))
    }
}
