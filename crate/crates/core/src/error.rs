use std::fmt;

use thiserror::Error;

use crate::randgraph::Violation;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid expected adjacency: {}", join(.0))]
    InvalidAdjacency(Vec<Violation>),

    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("sink vertex: out-degree 0 at {0:?}")]
    SinkVertices(Vec<usize>),

    #[error("not ergodic: {}", ergodic_reason(*.irreducible, *.aperiodic))]
    NotErgodic { irreducible: bool, aperiodic: bool },

    #[error("ill-conditioned solve: residual {residual:e} exceeds {tolerance:e}")]
    IllConditioned { residual: f64, tolerance: f64 },

    #[error("iteration cap of {iterations} exceeded (last estimate {estimate:e}, residual {residual:e})")]
    IterationCap {
        iterations: usize,
        estimate: f64,
        residual: f64,
    },

    #[error("vector is not mean-zero: entries sum to {0:e}")]
    NotMeanZero(f64),

    #[error("{what} must be positive, got {value}")]
    NonPositive { what: &'static str, value: f64 },

    #[error("zero entry at index {0}")]
    ZeroEntry(usize),

    #[error("{what} out of range: {value}")]
    OutOfRange { what: &'static str, value: f64 },

    #[error("not a distribution: {0}")]
    NotDistribution(String),

    #[error("not row-stochastic: {0}")]
    NotStochastic(String),

    #[error("invalid family spec: {0}")]
    InvalidSpec(String),

    #[error("empty grid")]
    EmptyGrid,

    #[error("parse error line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub(crate) fn parse(line: usize, message: impl Into<String>) -> Self {
        Error::Parse {
            line,
            message: message.into(),
        }
    }
}

fn join<T: fmt::Display>(items: &[T]) -> String {
    items
        .iter()
        .map(ToString::to_string)
        .collect::<Vec<_>>()
        .join("; ")
}

fn ergodic_reason(irreducible: bool, aperiodic: bool) -> &'static str {
    match (irreducible, aperiodic) {
        (false, _) => "reducible (support digraph not strongly connected)",
        (true, false) => "periodic",
        (true, true) => "unknown",
    }
}
