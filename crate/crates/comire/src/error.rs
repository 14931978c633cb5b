use thiserror::Error;

/// Errors produced by model construction, sampling, and the CLI pipeline.
#[derive(Error, Debug)]
pub enum ComireError {
    /// Invalid configuration (hyperparameters, knots, chain settings).
    #[error("configuration error: {0}")]
    Config(String),

    /// Argument outside the mathematical domain of an operation.
    #[error("domain error: {0}")]
    Domain(String),

    /// A structural invariant was violated (simplex, ordering restriction).
    #[error("invariant violation: {0}")]
    Invariant(String),

    /// Numerical failure with diagnostic context (observation or component index).
    #[error("numerical error: {0}")]
    Numerical(String),

    /// Malformed or inconsistent input data.
    #[error("data error: {0}")]
    Data(String),

    /// The fitted model is degenerate for the requested quantity.
    #[error("model degeneracy: {0}")]
    Degenerate(String),

    /// Invalid command usage (bad flags, empty required lists).
    #[error("usage error: {0}")]
    Usage(String),

    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, ComireError>;
