use std::fmt;

pub type Result<T> = std::result::Result<T, Error>;

/// Error type shared by all modules.
#[derive(Debug)]
pub enum Error {
    /// Invalid user-supplied parameter, grid, or file content.
    InvalidInput(String),
    /// An internal precondition was violated; indicates a bug upstream.
    ContractViolation(String),
    /// An instance exceeds a hard size bound (e.g. the brute-force matcher).
    TooLarge(String),
    /// A nonlinear fit failed to converge from any start.
    FitFailure { message: String, best_chi2: f64 },
    /// I/O failure; `completed` is the number of sweep points already persisted.
    Io { source: std::io::Error, completed: usize },
}

impl fmt::Display for Error {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Error::InvalidInput(msg) => write!(f, "invalid input: {msg}"),
            Error::ContractViolation(msg) => write!(f, "contract violation: {msg}"),
            Error::TooLarge(msg) => write!(f, "instance too large: {msg}"),
            Error::FitFailure { message, best_chi2 } => {
                write!(f, "fit failed: {message} (best residual chi2 = {best_chi2})")
            }
            Error::Io { source, completed } => {
                write!(f, "I/O error after {completed} completed points: {source}")
            }
        }
    }
}

impl std::error::Error for Error {
    fn source(&self) -> Option<&(dyn std::error::Error + 'static)> {
        match self {
            Error::Io { source, .. } => Some(source),
            _ => None,
        }
    }
}

impl From<std::io::Error> for Error {
    fn from(source: std::io::Error) -> Self {
        Error::Io { source, completed: 0 }
    }
}
