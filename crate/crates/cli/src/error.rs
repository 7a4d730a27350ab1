use std::fmt;
use std::path::Path;

use hopkey::{AdversaryError, AnalysisError, ConfigError, ExperimentError, ProtocolError};

/// Exit code on success.
pub const EXIT_OK: i32 = 0;
/// Bad flags, bad config file or config values.
pub const EXIT_CONFIG: i32 = 2;
/// The request is well formed but cannot be met.
pub const EXIT_INFEASIBLE: i32 = 3;
/// Reading or writing files failed.
pub const EXIT_IO: i32 = 4;

#[derive(Debug)]
pub enum CliError {
    Usage(String),
    Config(String),
    Infeasible(String),
    Io(String),
}

impl CliError {
    pub fn code(&self) -> i32 {
        match self {
            CliError::Usage(_) | CliError::Config(_) => EXIT_CONFIG,
            CliError::Infeasible(_) => EXIT_INFEASIBLE,
            CliError::Io(_) => EXIT_IO,
        }
    }

    pub fn kind(&self) -> &'static str {
        match self {
            CliError::Usage(_) => "usage",
            CliError::Config(_) => "config",
            CliError::Infeasible(_) => "infeasible",
            CliError::Io(_) => "io",
        }
    }

    fn message(&self) -> &str {
        match self {
            CliError::Usage(m) | CliError::Config(m) | CliError::Infeasible(m) | CliError::Io(m) => m,
        }
    }

    pub fn io(path: &Path, err: impl fmt::Display) -> Self {
        CliError::Io(format!("{}: {err}", path.display()))
    }
}

/// `error kind=<kind> code=<code>: <message>` on one line.
impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let msg = self.message().split_whitespace().collect::<Vec<_>>().join(" ");
        write!(f, "error kind={} code={}: {msg}", self.kind(), self.code())
    }
}

impl From<ConfigError> for CliError {
    fn from(e: ConfigError) -> Self {
        CliError::Config(e.to_string())
    }
}

impl From<AnalysisError> for CliError {
    fn from(e: AnalysisError) -> Self {
        match e {
            AnalysisError::Infeasible(m) => CliError::Infeasible(m),
            _ => CliError::Config(e.to_string()),
        }
    }
}

impl From<ProtocolError> for CliError {
    fn from(e: ProtocolError) -> Self {
        CliError::Config(e.to_string())
    }
}

impl From<AdversaryError> for CliError {
    fn from(e: AdversaryError) -> Self {
        CliError::Config(e.to_string())
    }
}

impl From<ExperimentError> for CliError {
    fn from(e: ExperimentError) -> Self {
        match e {
            ExperimentError::Csv(_) => CliError::Io(e.to_string()),
            _ => CliError::Config(e.to_string()),
        }
    }
}
