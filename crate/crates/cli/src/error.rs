use std::fmt::Display;
use std::path::Path;

use x2static::sweep::SweepError;
use x2static::train::TrainError;

/// Exit status 1 for usage errors, 2 for data and format errors.
#[derive(Debug)]
pub enum CliError {
    Usage(String),
    Data(String),
}

impl CliError {
    pub fn code(&self) -> u8 {
        match self {
            CliError::Usage(_) => 1,
            CliError::Data(_) => 2,
        }
    }

    pub fn message(&self) -> &str {
        match self {
            CliError::Usage(m) | CliError::Data(m) => m,
        }
    }

    /// Data error prefixed with the offending path.
    pub fn at<E: Display>(path: &Path) -> impl FnOnce(E) -> CliError + '_ {
        move |e| CliError::Data(format!("{}: {e}", path.display()))
    }
}

impl From<TrainError> for CliError {
    fn from(e: TrainError) -> Self {
        match e {
            TrainError::InvalidConfig(_) => CliError::Usage(e.to_string()),
            e => CliError::Data(e.to_string()),
        }
    }
}

impl From<SweepError> for CliError {
    fn from(e: SweepError) -> Self {
        match e {
            SweepError::InvalidFractions(_) | SweepError::EmptyPrefix { .. } => CliError::Usage(e.to_string()),
            SweepError::Train(t) => t.into(),
            e => CliError::Data(e.to_string()),
        }
    }
}
