use std::path::Path;

use thiserror::Error;

/// Exit status contract: 0 success, 1 bound violated, 2 invalid input, 3 I/O failure.
pub mod exit {
    pub const SUCCESS: u8 = 0;
    pub const VIOLATED: u8 = 1;
    pub const INVALID_INPUT: u8 = 2;
    pub const IO_FAILURE: u8 = 3;
}

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Input(String),
    #[error("{0}")]
    Io(String),
}

impl CliError {
    pub fn input(msg: impl Into<String>) -> Self {
        CliError::Input(msg.into())
    }

    pub fn io(path: &Path, e: std::io::Error) -> Self {
        CliError::Io(format!("{}: {e}", path.display()))
    }

    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Input(_) => exit::INVALID_INPUT,
            CliError::Io(_) => exit::IO_FAILURE,
        }
    }
}

impl From<statgap_core::Error> for CliError {
    fn from(e: statgap_core::Error) -> Self {
        match e {
            statgap_core::Error::Io(e) => CliError::Io(e.to_string()),
            other => CliError::Input(other.to_string()),
        }
    }
}

/// Short stable code for an error, used in experiment CSV rows.
pub fn error_code(e: &statgap_core::Error) -> &'static str {
    use statgap_core::Error::*;
    match e {
        InvalidAdjacency(_) => "invalid-adjacency",
        DimensionMismatch { .. } => "dimension-mismatch",
        SinkVertices(_) => "sink-vertices",
        NotErgodic { .. } => "not-ergodic",
        IllConditioned { .. } => "ill-conditioned",
        IterationCap { .. } => "iteration-cap",
        NotMeanZero(_) => "not-mean-zero",
        NonPositive { .. } => "non-positive",
        ZeroEntry(_) => "zero-entry",
        OutOfRange { .. } => "out-of-range",
        NotDistribution(_) => "not-distribution",
        NotStochastic(_) => "not-stochastic",
        InvalidSpec(_) => "invalid-spec",
        EmptyGrid => "empty-grid",
        Parse { .. } => "parse",
        Io(_) => "io",
    }
}
