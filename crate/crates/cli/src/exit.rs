use std::fmt;

use rnff::Error;

pub const CONFIG: i32 = 2;
pub const NUMERIC: i32 = 3;
pub const IO: i32 = 4;

#[derive(Debug)]
pub struct CliError {
    pub code: i32,
    pub message: String,
}

impl CliError {
    pub fn config(msg: impl fmt::Display) -> Self {
        Self {
            code: CONFIG,
            message: msg.to_string(),
        }
    }

    pub fn numeric(msg: impl fmt::Display) -> Self {
        Self {
            code: NUMERIC,
            message: msg.to_string(),
        }
    }

    pub fn io(msg: impl fmt::Display) -> Self {
        Self {
            code: IO,
            message: msg.to_string(),
        }
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
        let code = match &e {
            Error::Io(_) => IO,
            Error::Parse(_)
            | Error::InvalidParameter(_)
            | Error::Dimension(_)
            | Error::Json(_)
            | Error::AliasingViolation { .. } => CONFIG,
            Error::NonHermitianInput { .. }
            | Error::IndefiniteInput { .. }
            | Error::SingularInnerSystem { .. }
            | Error::NonRealKernel { .. }
            | Error::ZeroReference
            | Error::DivergedLoss { .. } => NUMERIC,
        };
        Self {
            code,
            message: e.to_string(),
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        Self::io(e)
    }
}
