use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    /// The classical series expansion is only meaningful for |αζ| ≪ 1 and a
    /// small retardation phase kτ|v|.
    #[error("outside the validity range: |alpha*zeta| = {alpha_zeta:e}, k*tau*|v| = {retardation:e} (both must be < 0.1)")]
    OutOfValidity { alpha_zeta: f64, retardation: f64 },

    #[error("no stationary state: friction coefficient {gamma:e} kg/s is not positive")]
    NoStationaryState { gamma: f64 },

    #[error("history underrun: requested t = {requested:e} s, buffer covers [{earliest:e}, {latest:e}] s")]
    HistoryUnderrun { requested: f64, earliest: f64, latest: f64 },

    #[error("insufficient samples: need at least {needed}, got {got}")]
    InsufficientSamples { needed: usize, got: usize },

    #[error("no cooling: fitted slope {slope:e} 1/s is not negative")]
    NoCooling { slope: f64 },

    #[error("transient not converged: full-window estimate {full:e}, inner-window estimate {inner:e}")]
    NotConverged { full: f64, inner: f64 },
}

impl Error {
    pub(crate) fn invalid(name: &'static str, reason: impl Into<String>) -> Self {
        Error::InvalidParameter { name, reason: reason.into() }
    }
}

/// Fails with `InvalidParameter` unless `value` is finite and strictly positive.
pub(crate) fn ensure_positive(name: &'static str, value: f64) -> Result<()> {
    if value.is_finite() && value > 0.0 {
        Ok(())
    } else {
        Err(Error::invalid(name, format!("must be finite and > 0, got {value}")))
    }
}

pub(crate) fn ensure_finite(name: &'static str, value: f64) -> Result<()> {
    if value.is_finite() {
        Ok(())
    } else {
        Err(Error::invalid(name, format!("must be finite, got {value}")))
    }
}
