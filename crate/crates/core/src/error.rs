use thiserror::Error;

/// Errors raised by the geometric routines.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("point at radius {radius} lies inside the excluded ball of radius {inner}")]
    Domain { radius: f64, inner: f64 },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("representation is not positive: U = {value} at {location}")]
    NotPositive { value: f64, location: String },

    #[error("stencil at grid index {index} needs {needed} neighbours on each side (grid has {len} nodes)")]
    Margin { index: usize, needed: usize, len: usize },

    #[error("invariant `{invariant}` violated: {detail}")]
    Invariant { invariant: String, detail: String },

    #[error("deformation parameter s = {s} is inadmissible: {reason}")]
    Inadmissible { s: f64, reason: String },

    #[error("solver failure: {0}")]
    Solver(String),

    #[error("mass extrapolation did not converge: {0}")]
    NonConvergentFit(String),

    #[error("parse error: {0}")]
    Parse(String),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub(crate) fn invariant(name: &str, detail: impl Into<String>) -> Self {
        Error::Invariant {
            invariant: name.to_string(),
            detail: detail.into(),
        }
    }
}
