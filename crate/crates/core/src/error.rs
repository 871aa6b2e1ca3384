use thiserror::Error;

/// Errors surfaced by environments, agents, and the run harness.
#[derive(Debug, Error)]
pub enum Error {
    /// An action, state, or layer index was outside its declared range.
    #[error("index out of range: {0}")]
    IndexOutOfRange(String),

    /// A caller violated an operation's contract (bad reward range, bad
    /// parameter, zero count where a visit was recorded, ...).
    #[error("contract violation: {0}")]
    Contract(String),

    /// An instance document failed validation.
    #[error("invalid instance: {0}")]
    InvalidInstance(String),

    /// A run configuration failed validation.
    #[error("invalid config: {0}")]
    InvalidConfig(String),

    /// The configured algorithm cannot run on the configured instance kind.
    #[error("algorithm `{algorithm}` cannot run on a `{instance}` instance")]
    AlgorithmInstanceMismatch {
        algorithm: String,
        instance: String,
    },

    /// Trace aggregation was asked to do something ill-posed.
    #[error("aggregation error: {0}")]
    Aggregation(String),
}

pub type Result<T> = std::result::Result<T, Error>;
