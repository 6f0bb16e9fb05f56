use std::path::PathBuf;

use serde::Serialize;
use thiserror::Error;

pub const EXIT_OK: i32 = 0;
pub const EXIT_VALIDATION: i32 = 2;
pub const EXIT_NUMERIC: i32 = 3;
pub const EXIT_IO: i32 = 4;

#[derive(Debug, Error)]
pub enum CliError {
    #[error(transparent)]
    Core(#[from] beliefq_core::Error),

    #[error("{axis} value {value} outside [{lo}, {hi}]")]
    Range { axis: String, value: f64, lo: f64, hi: f64 },

    #[error("invalid input: {0}")]
    Input(String),

    #[error("cannot parse {path}: {message}")]
    Parse { path: PathBuf, message: String },

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("write failed: {0}")]
    Write(String),
}

pub type CliResult<T> = Result<T, CliError>;

impl CliError {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        CliError::Io { path: path.into(), source }
    }

    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Core(e) if e.is_validation() => EXIT_VALIDATION,
            CliError::Core(beliefq_core::Error::NoJoin) => EXIT_VALIDATION,
            CliError::Core(_) => EXIT_NUMERIC,
            CliError::Range { .. } | CliError::Input(_) | CliError::Parse { .. } => EXIT_VALIDATION,
            CliError::Io { .. } | CliError::Write(_) => EXIT_IO,
        }
    }

    /// Short machine-readable reason.
    pub fn kind(&self) -> &'static str {
        use beliefq_core::Error as E;
        match self {
            CliError::Core(e) => match e {
                E::InvalidParams(_) => "invalid_params",
                E::InvalidBelief(_) => "invalid_belief",
                E::UnstableRegime { .. } => "unstable_regime",
                E::NotMM1 { .. } => "not_mm1",
                E::OutOfSupport { .. } => "out_of_support",
                E::NoJoin => "no_join",
                E::NoCrossing { .. } => "no_crossing",
                E::NonUnimodal { .. } => "non_unimodal",
                E::NotBracketed { .. } => "not_bracketed",
                E::FeeOutOfRange { .. } => "fee_out_of_range",
                E::InvalidConfig(_) => "invalid_config",
                E::UnstableEffective { .. } => "unstable_effective",
            },
            CliError::Range { .. } => "range",
            CliError::Input(_) => "invalid_input",
            CliError::Parse { .. } => "parse",
            CliError::Io { .. } => "io",
            CliError::Write(_) => "write",
        }
    }

    pub fn report(&self) -> ErrorReport {
        ErrorReport {
            error: self.kind().to_string(),
            message: self.to_string(),
            exit_code: self.exit_code(),
        }
    }
}

/// What gets printed to stderr on failure.
#[derive(Debug, Clone, PartialEq, Serialize, serde::Deserialize)]
pub struct ErrorReport {
    pub error: String,
    pub message: String,
    pub exit_code: i32,
}

impl From<csv::Error> for CliError {
    fn from(e: csv::Error) -> Self {
        CliError::Write(e.to_string())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exit_codes() {
        let numeric = CliError::Core(beliefq_core::Error::NonUnimodal { first: (1.0, 2.0), second: (3.0, 2.0) });
        assert_eq!(numeric.exit_code(), EXIT_NUMERIC);
        let crossing = CliError::Core(beliefq_core::Error::NoCrossing { lo: 0.0, hi: 1.0, identical: false });
        assert_eq!(crossing.exit_code(), EXIT_NUMERIC);
        assert_eq!(CliError::Core(beliefq_core::Error::InvalidParams("x".into())).exit_code(), EXIT_VALIDATION);
        let range = CliError::Range { axis: "p".into(), value: 9.0, lo: 0.0, hi: 4.0 };
        assert_eq!(range.exit_code(), EXIT_VALIDATION);
        let io = CliError::io("/nope", std::io::Error::from(std::io::ErrorKind::NotFound));
        assert_eq!(io.exit_code(), EXIT_IO);
        assert_eq!(io.report().error, "io");
    }
}
