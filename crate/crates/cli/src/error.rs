use std::fmt;
use std::path::Path;

use radiomap_core::Error;

pub const EXIT_OK: u8 = 0;
/// A theory check ran to completion and its verdict was "fail".
pub const EXIT_CHECK_FAILED: u8 = 1;
pub const EXIT_INPUT: u8 = 2;
pub const EXIT_DATA_QUALITY: u8 = 3;
pub const EXIT_INFEASIBLE: u8 = 4;

/// An error carrying the process exit code it maps to.
#[derive(Debug)]
pub struct CliError {
    pub code: u8,
    pub message: String,
}

impl CliError {
    pub fn input(message: impl Into<String>) -> Self {
        Self { code: EXIT_INPUT, message: message.into() }
    }

    pub fn quality(message: impl Into<String>) -> Self {
        Self { code: EXIT_DATA_QUALITY, message: message.into() }
    }

    pub fn infeasible(message: impl Into<String>) -> Self {
        Self { code: EXIT_INFEASIBLE, message: message.into() }
    }

    pub fn io(path: &Path, err: impl fmt::Display) -> Self {
        Self::input(format!("{}: {err}", path.display()))
    }

    pub fn context(mut self, what: impl fmt::Display) -> Self {
        self.message = format!("{what}: {}", self.message);
        self
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.message)
    }
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        let code = match e {
            Error::NonFinite(_)
            | Error::SingularCovariance(_)
            | Error::DegenerateWindow(_)
            | Error::NotSymmetric(_) => EXIT_DATA_QUALITY,
            Error::NoFeasibleRoute => EXIT_INFEASIBLE,
            _ => EXIT_INPUT,
        };
        Self { code, message: e.to_string() }
    }
}

pub type CliResult<T> = std::result::Result<T, CliError>;
