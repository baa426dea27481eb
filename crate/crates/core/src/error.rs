use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    /// A physical parameter lies outside its domain.
    #[error("invalid parameter: {0}")]
    Domain(String),

    /// The pump parameter is at or above the oscillation threshold.
    #[error("above threshold unsupported (mu = {0})")]
    AboveThreshold(f64),

    #[error("invalid simulation config: {0}")]
    Config(String),

    #[error("no samples")]
    NoSamples,

    #[error("insufficient batches: found {found}, need at least {needed}")]
    InsufficientBatches { found: usize, needed: usize },

    #[error("accumulator schema mismatch")]
    SchemaMismatch,

    #[error("missing moment channel: {0}")]
    MissingMoment(String),

    #[error("missing uncertainties")]
    MissingUncertainty,

    /// Both sides of an inequality vanish; no verdict can be drawn.
    #[error("no signal")]
    NoSignal,
}

pub type Result<T> = std::result::Result<T, Error>;
