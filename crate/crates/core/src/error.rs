use thiserror::Error;

/// Errors raised by the geometry and simulation pipeline.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    /// An argument is outside the domain of the operation.
    #[error("domain error: {0}")]
    Domain(String),

    /// Points handed to a solver are linearly (or affinely) dependent.
    #[error("singular configuration: {0}")]
    Singular(String),

    /// Input to the hull engine does not span the ambient space.
    #[error("degenerate input: {0}")]
    Degenerate(String),

    /// The sampled configuration does not bound the cell; the truncation radius must grow.
    #[error("cell is unbounded for the current truncation")]
    Unbounded,

    /// The requested work exceeds the configured point budget.
    #[error("budget exceeded: {0}")]
    Budget(String),

    /// Linear program has no feasible point.
    #[error("linear program is infeasible")]
    Infeasible,

    /// An operation is unavailable for this input size (e.g. exact width above the guard).
    #[error("unavailable: {0}")]
    Unavailable(String),

    /// Internal bookkeeping disagreed with itself.
    #[error("internal consistency error: {0}")]
    Consistency(String),

    #[error("i/o error: {0}")]
    Io(String),

    #[error("parse error: {0}")]
    Parse(String),
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

impl From<serde_json::Error> for Error {
    fn from(e: serde_json::Error) -> Self {
        Error::Parse(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
