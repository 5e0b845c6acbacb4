//! Error type shared across the crate.

/// Crate-wide error type.
///
/// The variants map onto the CLI exit codes: `Usage`, `Domain` and `Parse`
/// are caller mistakes (exit 2), `Model` marks a spec that is structurally
/// invalid for the requested computation (exit 3), and `NotPositiveDefinite`
/// / `Io` are numeric or environment failures (exit 4).
#[derive(Debug, thiserror::Error)]
pub enum Error {
    /// An argument is outside the mathematical domain of an operation.
    #[error("domain error: {0}")]
    Domain(String),

    /// Arguments are individually valid but the requested combination is not.
    #[error("usage error: {0}")]
    Usage(String),

    /// The model specification violates a structural assumption.
    #[error("model error: {0}")]
    Model(String),

    /// Cholesky factorization failed even at the largest scheduled jitter.
    #[error("matrix not positive definite: pivot {pivot} failed at max jitter {max_jitter:.3e}")]
    NotPositiveDefinite { pivot: usize, max_jitter: f64 },

    /// A configuration file failed schema validation.
    #[error("parse error: {0}")]
    Parse(String),

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
