use std::io;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("graphs differ in directedness")]
    DirectednessMismatch,

    #[error("dimension mismatch: expected {expected}, got {actual}")]
    DimensionMismatch { expected: usize, actual: usize },

    #[error("invalid permutation: {0}")]
    InvalidPermutation(String),

    #[error("brute-force search over {vertices} vertices exceeds the cap of {cap}")]
    BruteForceCap { vertices: usize, cap: usize },

    #[error("{n}! does not fit in 64 bits (n must be <= 20)")]
    FactorialOverflow { n: usize },

    #[error("index {index} is not a feasible permutation index for n = {n}")]
    InfeasibleIndex { index: u64, n: usize },

    #[error("{qubits} qubits exceeds the configured maximum of {max}")]
    QubitCap { qubits: u32, max: u32 },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("non-finite parameter: {0}")]
    NonFinite(&'static str),

    #[error("chebyshev series did not converge within {limit} terms")]
    NoConvergence { limit: usize },

    #[error("invalid search box: {0}")]
    InvalidBox(String),

    #[error("optimizer '{0}' is not implemented")]
    UnsupportedMethod(String),

    #[error("graph parse error at line {line}: {message}")]
    GraphParse { line: usize, message: String },

    #[error("cost cache: {0}")]
    CostCache(String),

    #[error("config: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    /// Errors caused by bad user input rather than a failure while running.
    pub fn is_validation(&self) -> bool {
        !matches!(
            self,
            Error::NoConvergence { .. } | Error::Io(_) | Error::Csv(_)
        )
    }
}
