use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("grid [{r_min:e}, {r_max:e}] m cannot hold a packet at {center:e} m with the required {margin:e} m margin")]
    GridTooSmall {
        r_min: f64,
        r_max: f64,
        center: f64,
        margin: f64,
    },

    #[error("grid spacing {dx:e} m exceeds {limit:e} m (1/20 of the shortest de Broglie or optical wavelength)")]
    GridTooCoarse { dx: f64, limit: f64 },

    #[error("time step {dt:e} s exceeds the {bound} limit {limit:e} s")]
    TimeStep {
        dt: f64,
        limit: f64,
        bound: &'static str,
    },

    #[error("norm drifted by {drift:e} at t = {t:e} s (limit {limit:e})")]
    NormDrift { t: f64, drift: f64, limit: f64 },

    #[error("packet reached the grid edge at t = {t:e} s ({mass:e} of the norm in the guard zone)")]
    EdgeContact { t: f64, mass: f64 },

    #[error("invalid parameter `{name}`: {constraint} (got {value:e})")]
    InvalidParameter {
        name: &'static str,
        constraint: &'static str,
        value: f64,
    },

    #[error(transparent)]
    Core(#[from] optoforce_core::Error),
}

pub(crate) fn check_positive(name: &'static str, value: f64) -> Result<()> {
    if value.is_finite() && value > 0.0 {
        Ok(())
    } else {
        Err(Error::InvalidParameter {
            name,
            constraint: "must be finite and > 0",
            value,
        })
    }
}
