use thiserror::Error;

pub type Result<T> = core::result::Result<T, Error>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid parameter `{name}`: must be {constraint} (got {value:e})")]
    InvalidParameter {
        name: &'static str,
        constraint: &'static str,
        value: f64,
    },

    /// The effective detuning fell inside the guard band around resonance,
    /// where the perturbative light-shift expressions diverge.
    #[error("near resonance: |detuning| = {detuning:e} rad/s is inside the guard band {guard_band:e} rad/s")]
    NearResonance { detuning: f64, guard_band: f64 },

    #[error("step size underflow at t = {t:e} s (h = {step:e} s); tolerance unreachable")]
    StepFailure { t: f64, step: f64 },

    #[error("step budget of {max_steps} exhausted at t = {t:e} s")]
    StepLimit { t: f64, max_steps: usize },

    #[error("{invalid} of {total} atoms were invalid (limit 1%)")]
    TooManyInvalid { invalid: usize, total: usize },
}

impl Error {
    pub(crate) fn check_positive(name: &'static str, value: f64) -> Result<()> {
        if value.is_finite() && value > 0.0 {
            Ok(())
        } else {
            Err(Error::InvalidParameter {
                name,
                constraint: "finite and > 0",
                value,
            })
        }
    }

    pub(crate) fn check_finite(name: &'static str, value: f64) -> Result<()> {
        if value.is_finite() {
            Ok(())
        } else {
            Err(Error::InvalidParameter {
                name,
                constraint: "finite",
                value,
            })
        }
    }
}
