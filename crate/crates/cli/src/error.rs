use std::fmt;
use std::path::Path;
use std::process::ExitCode;

/// An error with the process exit status it maps to.
#[derive(Debug)]
pub struct CliError {
    pub code: u8,
    pub message: String,
}

pub const USAGE: u8 = 2;
pub const NOT_CONVERGED: u8 = 3;
pub const IO: u8 = 4;

impl CliError {
    pub fn usage(message: impl Into<String>) -> Self {
        CliError {
            code: USAGE,
            message: message.into(),
        }
    }

    pub fn io(path: &Path, e: std::io::Error) -> Self {
        CliError {
            code: IO,
            message: format!("{}: {e}", path.display()),
        }
    }

    pub fn exit_code(&self) -> ExitCode {
        ExitCode::from(self.code)
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.message)
    }
}

impl From<fbreg::Error> for CliError {
    fn from(e: fbreg::Error) -> Self {
        let code = match &e {
            fbreg::Error::Io(_) => IO,
            fbreg::Error::Csv(c) if c.is_io_error() => IO,
            _ => USAGE,
        };
        CliError {
            code,
            message: e.to_string(),
        }
    }
}
