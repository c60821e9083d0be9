use std::path::PathBuf;

use thiserror::Error;

/// Errors raised anywhere in the toolkit.
#[derive(Debug, Error)]
pub enum Error {
    #[error("H(p) is infinite at p = {p}: finiteness radius is {p_max}")]
    Domain { p: f64, p_max: f64 },

    #[error("H(p) overflows double precision at p = {p}")]
    Overflow { p: f64 },

    #[error("quadrature did not converge (error estimate {estimate:e}, requested {requested:e})")]
    Quadrature { estimate: f64, requested: f64 },

    #[error("Legendre conjugate failed at q = {q}: {reason}")]
    Conjugate { q: f64, reason: String },

    #[error("kernel {family} is not supported here: {reason}")]
    UnsupportedKernel { family: String, reason: String },

    #[error("grid spacing h = {h} under-resolves the kernel (need h <= {max_h})")]
    Resolution { h: f64, max_h: f64 },

    #[error("solution norm grew to {norm:e} (limit {limit:e}) at t = {time}; time step too large")]
    Instability { norm: f64, limit: f64, time: f64 },

    #[error("invalid {field}: {message}")]
    Invalid { field: String, message: String },

    #[error("{path}: {message}")]
    Parse { path: PathBuf, message: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn invalid(field: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Invalid {
            field: field.into(),
            message: message.into(),
        }
    }

    /// True for failures of the numerics (as opposed to bad input or I/O).
    pub fn is_numerical(&self) -> bool {
        matches!(
            self,
            Error::Domain { .. }
                | Error::Overflow { .. }
                | Error::Quadrature { .. }
                | Error::Conjugate { .. }
                | Error::Instability { .. }
        )
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
