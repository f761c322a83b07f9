//! Error type shared by every module of the crate.

use num_complex::Complex64;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    /// Invalid configuration (grid counts below minimum, bad exponents, ...).
    #[error("configuration error: {0}")]
    Config(String),

    /// Expression text did not conform to the grammar.
    #[error("parse error at byte {offset}: {message}")]
    Parse { offset: usize, message: String },

    /// Identifier outside the known variable/function set.
    #[error("unknown identifier `{name}` at byte {offset}")]
    UnknownIdentifier { name: String, offset: usize },

    /// Evaluation hit a branch cut, a pole, or a zero base with negative exponent.
    #[error("singular evaluation: {0}")]
    SingularEval(String),

    /// An integrand produced a non-finite value at a quadrature node.
    #[error("non-finite value at node ({re}, {im}): {context}")]
    NonFinite { re: f64, im: f64, context: String },

    /// A mathematical hypothesis of the requested operation is violated.
    /// The message names the hypothesis so callers can report it verbatim.
    #[error("hypothesis violated: {0}")]
    Hypothesis(String),

    /// Point outside the operator's domain of validity.
    #[error("domain error: {0}")]
    Domain(String),

    /// Input outside the symbolic path's scope (non-polynomial data, etc.).
    #[error("unsupported: {0}")]
    Unsupported(String),
}

impl Error {
    pub fn non_finite(node: Complex64, context: impl Into<String>) -> Self {
        Error::NonFinite {
            re: node.re,
            im: node.im,
            context: context.into(),
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
