//! Error type shared across the signal-processing modules.

use thiserror::Error;

/// Errors produced by waveform generation, capture, alignment, ILC and
/// model fitting.
#[derive(Debug, Error)]
pub enum Error {
    /// A configuration violates its invariants (bad FFT occupancy, bad
    /// quantizer bit depth, non-integer oversampled lengths, ...).
    #[error("invalid configuration: {0}")]
    Config(String),

    /// An argument fell outside the mathematical domain of an operation.
    #[error("domain error: {0}")]
    Domain(String),

    /// A metric is undefined for the given input (zero-power waveform,
    /// empty percentile group).
    #[error("undefined metric: {0}")]
    UndefinedMetric(String),

    /// Operands have incompatible shapes or lengths.
    #[error("shape mismatch: {0}")]
    Shape(String),

    /// Input too short for the requested operation.
    #[error("length error: {0}")]
    Length(String),

    /// Cross-correlation produced two competing delay candidates.
    #[error("delay estimate ambiguous: {0}")]
    Ambiguity(String),

    /// Captured waveform cannot be matched to the reference.
    #[error("alignment failure: {0}")]
    Alignment(String),

    /// The regressor matrix is rank deficient; carries the condition
    /// estimate so callers can report it.
    #[error("ill-conditioned fit: condition estimate {condition:.3e}")]
    Conditioning { condition: f64 },

    /// Fewer samples than model terms.
    #[error("underdetermined system: {rows} rows < {cols} columns")]
    Underdetermined { rows: usize, cols: usize },

    /// The plant under ILC returned an unusable response.
    #[error("plant failure: {0}")]
    Plant(String),

    /// Linear-algebra backend failure during fitting.
    #[error("linear algebra error: {0}")]
    Linalg(String),

    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),

    /// A serialized artifact did not parse.
    #[error("parse error: {0}")]
    Parse(String),
}

pub type Result<T> = std::result::Result<T, Error>;
