use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("invalid config: {0}")]
    InvalidConfig(String),

    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    /// No client update survived the round; the caller carries the previous
    /// global state forward.
    #[error("no updates to aggregate")]
    NoUpdates,

    #[error("checkpoint round {got} precedes last logged round {last}")]
    RoundRegression { last: u64, got: u64 },

    #[error("no checkpoint at or before round {0}")]
    CheckpointNotFound(i64),

    #[error("corruption baseline has not been established")]
    BaselineNotEstablished,

    #[error("no active participant can coordinate round {0}")]
    NoActiveClients(u64),

    #[error("metric undefined: {0}")]
    UndefinedMetric(String),

    #[error("no observations recorded")]
    NoObservations,

    #[error("malformed data: {0}")]
    Malformed(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}
