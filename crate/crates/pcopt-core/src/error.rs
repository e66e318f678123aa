//! Crate-wide error type.

use thiserror::Error;

/// Errors reported by parsing, evaluation, quadrature and solver code.
#[derive(Debug, Error)]
pub enum Error {
    /// Syntax error in a problem file or expression, with 1-based position.
    #[error("parse error at line {line}, column {column}: {message}")]
    Parse {
        line: usize,
        column: usize,
        message: String,
    },

    /// Structurally invalid problem (undeclared names, bad distribution, ...).
    #[error("invalid problem: {0}")]
    Invalid(String),

    /// Runtime expression evaluation failure (missing binding, division by zero).
    #[error("evaluation error: {0}")]
    Eval(String),

    /// Numerical failure (non-finite value, eigen iteration stall, ...).
    #[error("numerical error: {0}")]
    Numerical(String),

    /// Optimizer failure (inner solve did not converge where one is required).
    #[error("solver error: {0}")]
    Solver(String),

    /// A diagnostic quantity violated an inequality it is supposed to satisfy.
    #[error("diagnostic inconsistency: {0}")]
    Inconsistency(String),
}

pub type Result<T> = std::result::Result<T, Error>;
