use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    /// Input text or bytes do not follow the expected layout.
    #[error("format error: {0}")]
    Format(String),

    /// Input is well-formed but violates a domain invariant.
    #[error("validity error: {0}")]
    Validity(String),

    #[error("calibration error: {0}")]
    Calibration(String),

    #[error("training diverged at iteration {iteration}: loss = {loss}")]
    Diverged { iteration: usize, loss: f64 },

    #[error("tile at ({x}, {y}) already performed {cap} updates")]
    UpdateCap { x: usize, y: usize, cap: u32 },

    #[error("i/o error on {}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    /// Short stable identifier used by the command line for machine-readable errors.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::Format(_) => "format",
            Error::Validity(_) => "validity",
            Error::Calibration(_) => "calibration",
            Error::Diverged { .. } => "diverged",
            Error::UpdateCap { .. } => "update-cap",
            Error::Io { .. } => "io",
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
