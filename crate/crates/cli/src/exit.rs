use std::fmt;
use std::path::Path;

use modcma_core::Error;

pub const INVALID_CONFIG: i32 = 2;
pub const UNKNOWN_FUNCTION: i32 = 3;
pub const MISSING_INPUT: i32 = 4;

#[derive(Debug)]
pub struct CliError {
    pub code: i32,
    pub message: String,
}

impl CliError {
    pub fn invalid(message: impl Into<String>) -> Self {
        CliError { code: INVALID_CONFIG, message: message.into() }
    }

    pub fn missing(path: &Path) -> Self {
        CliError { code: MISSING_INPUT, message: format!("cannot read {}", path.display()) }
    }

    pub fn other(message: impl Into<String>) -> Self {
        CliError { code: 1, message: message.into() }
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
            Error::InvalidConfig(_) | Error::InvalidArgument(_) => INVALID_CONFIG,
            Error::UnknownFunction(_) => UNKNOWN_FUNCTION,
            _ => 1,
        };
        CliError { code, message: e.to_string() }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::other(e.to_string())
    }
}

pub fn read_input(path: &Path) -> Result<String, CliError> {
    std::fs::read_to_string(path).map_err(|_| CliError::missing(path))
}
