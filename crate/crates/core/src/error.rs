use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

/// Crate-wide error type. Contract violations (mis-sized inputs, invalid
/// parameters) are reported as errors rather than panics so that callers
/// driving the library from files can surface them cleanly.
#[derive(Debug, Error)]
pub enum Error {
    #[error("{what}: expected length {expected}, got {got}")]
    LengthMismatch {
        what: &'static str,
        expected: usize,
        got: usize,
    },

    #[error("invalid problem: {0}")]
    InvalidProblem(String),

    #[error("invalid network: {0}")]
    InvalidNetwork(String),

    #[error("invalid parameter: {0}")]
    InvalidParam(String),

    #[error("invalid schedule: {0}")]
    InvalidSchedule(String),

    #[error("conflicting clues for variable {variable}")]
    ConflictingClues { variable: u32 },

    #[error("invalid clue: {0}")]
    InvalidClue(String),

    #[error("search space of {product} assignments exceeds the enumeration bound {bound}")]
    SearchSpaceExceeded { product: u128, bound: u128 },

    #[error("not enough data: {0}")]
    InsufficientData(String),
}
