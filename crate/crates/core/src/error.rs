use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    /// An input violated a documented precondition.
    #[error("domain error: {0}")]
    Domain(String),

    /// A brute-force search could not confirm its answer (e.g. the optimum sits on the grid edge).
    #[error("inconclusive: {0}")]
    Inconclusive(String),

    #[error("numerical failure: {0}")]
    Numeric(String),

    #[error("I/O error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("CSV error on {path}: {source}")]
    Csv {
        path: PathBuf,
        #[source]
        source: csv::Error,
    },
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn domain<T>(msg: impl Into<String>) -> Result<T> {
    Err(Error::Domain(msg.into()))
}

/// Rejects `t > horizon`.
pub(crate) fn check_time(t: f64, horizon: f64) -> Result<()> {
    if !(t <= horizon) {
        return domain(format!("time {t} lies beyond the horizon {horizon}"));
    }
    Ok(())
}
