use std::fmt;
use std::process::ExitCode;

use deterrence::Error;

/// A command failure, classified by exit status.
#[derive(Debug)]
pub enum Failure {
    /// Bad flags, config keys or referenced paths.
    Usage(String),
    /// Input data could not be read or modelled.
    Data(String),
    /// `recover` ran but a tolerance was violated.
    Acceptance(String),
}

impl Failure {
    pub fn exit_code(&self) -> ExitCode {
        ExitCode::from(match self {
            Self::Usage(_) => 1,
            Self::Data(_) => 2,
            Self::Acceptance(_) => 3,
        })
    }
}

impl fmt::Display for Failure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::Usage(m) => write!(f, "usage error: {m}"),
            Self::Data(m) => write!(f, "data error: {m}"),
            Self::Acceptance(m) => write!(f, "acceptance failure: {m}"),
        }
    }
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        match e {
            Error::InvalidGrid(_)
            | Error::InvalidBinning(_)
            | Error::InvalidConfig(_)
            | Error::InsufficientHistory { .. }
            | Error::UnknownFeature(_) => Self::Usage(e.to_string()),
            _ => Self::Data(e.to_string()),
        }
    }
}

impl From<serde_json::Error> for Failure {
    fn from(e: serde_json::Error) -> Self {
        Self::Data(e.to_string())
    }
}

pub type CmdResult<T = ()> = std::result::Result<T, Failure>;
