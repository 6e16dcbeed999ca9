use thiserror::Error;

/// Errors raised by the solvers, the optimizer and the scenario runner.
#[derive(Debug, Error)]
pub enum Error {
    /// Caller violated a precondition (mismatched lengths, bad parameters, ...).
    #[error("usage error: {0}")]
    Usage(String),

    /// Integration produced non-finite values or blew up.
    #[error("numerical error: {what} (max |value| = {max_abs:e})")]
    Numerical { what: String, max_abs: f64 },

    /// An update direction vanished where a nonzero one was required.
    #[error("degenerate update: {0}")]
    Degenerate(String),

    /// Invalid scenario configuration.
    #[error("config error: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn usage<T>(msg: impl Into<String>) -> Result<T> {
    Err(Error::Usage(msg.into()))
}

pub(crate) fn ensure_len(name: &str, got: usize, want: usize) -> Result<()> {
    if got != want {
        return usage(format!("{name}: length {got} does not match grid length {want}"));
    }
    Ok(())
}
