//! Crate-wide error type.

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    /// A model parameter violates its domain (sigma <= 0, q outside [0,1), ...).
    #[error("invalid parameter: {0}")]
    InvalidParams(String),

    /// Two grids that must share nodes do not.
    #[error("grid mismatch: {0}")]
    GridMismatch(String),

    /// The grid does not cover the fee band it is used with.
    #[error("band [{lo}, {hi}] not covered by grid [{grid_lo}, {grid_hi}]")]
    BandOutsideGrid {
        lo: f64,
        hi: f64,
        grid_lo: f64,
        grid_hi: f64,
    },

    /// The density iteration produced a non-finite value.
    #[error("non-finite density value {value} at node {node} (x = {x})")]
    NonFinite { node: usize, x: f64, value: f64 },

    /// A simulated state left the representable mispricing range.
    #[error("simulated mispricing overflow |x| > {limit} at step {step} (x = {x})")]
    StateOverflow { step: u64, x: f64, limit: f64 },

    /// An estimator was handed inputs outside the domain of its formula.
    #[error("unsupported input: {0}")]
    Unsupported(String),

    /// A fit or solve degenerated (empty partition, singular system, ...).
    #[error("degenerate input: {0}")]
    Degenerate(String),

    /// Malformed data file beyond the tolerated fraction of bad rows.
    #[error("{path}: {bad} of {total} rows malformed (limit 1%)")]
    TooManyBadRows {
        path: String,
        bad: usize,
        total: usize,
    },

    /// Flat key-value config problems: unknown key, unparsable value, missing key.
    #[error("config error: {0}")]
    Config(String),

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),

    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}
