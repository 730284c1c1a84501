use alloc::string::String;
use core::fmt;

use crate::geometry::Point;

pub type Result<T, E = Error> = core::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq)]
pub enum Error {
    /// A point left the declared phase space.
    DomainViolation {
        point: Point,
        step: Option<usize>,
        context: String,
    },
    /// A parameter is outside its admissible range.
    Parameter { name: &'static str, message: String },
    /// Bad call-site argument (empty measure, size mismatch, ...).
    Argument(String),
    /// The requested operation needs data the system does not provide.
    Capability(String),
    /// An iterative method stopped without meeting its tolerance.
    Convergence { method: &'static str, residual: f64, iterations: usize },
    /// Base marginals disagree where the operation needs them equal.
    Precondition { message: String, worst_cell: usize, gap: f64 },
    /// Exponent or summability condition violated.
    Infeasible(String),
}

impl fmt::Display for Error {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Error::DomainViolation { point, step, context } => {
                write!(f, "domain violation ({context}): point {point} left the phase space")?;
                if let Some(step) = step {
                    write!(f, " at step {step}")?;
                }
                Ok(())
            }
            Error::Parameter { name, message } => write!(f, "invalid parameter `{name}`: {message}"),
            Error::Argument(msg) => write!(f, "invalid argument: {msg}"),
            Error::Capability(msg) => write!(f, "unsupported: {msg}"),
            Error::Convergence { method, residual, iterations } => write!(
                f,
                "{method} did not converge after {iterations} iterations (residual {residual:e})"
            ),
            Error::Precondition { message, worst_cell, gap } => {
                write!(f, "{message} (worst cell {worst_cell}, gap {gap:e})")
            }
            Error::Infeasible(msg) => write!(f, "infeasible: {msg}"),
        }
    }
}

impl core::error::Error for Error {}

pub(crate) fn param(name: &'static str, message: impl Into<String>) -> Error {
    Error::Parameter { name, message: message.into() }
}
