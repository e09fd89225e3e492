//! Error type shared across the crate.
//!
//! Variants split into two families so callers (notably the CLI) can map
//! them to distinct failure classes: malformed input versus numerical
//! failure inside a solver.

use thiserror::Error;

/// Everything that can go wrong in this crate.
#[derive(Debug, Error)]
pub enum Error {
    /// Confidence level outside (0, 1].
    #[error("confidence level out of range: beta must be in (0, 1], got {0}")]
    ConfidenceOutOfRange(f64),

    /// A probability vector argument had the wrong length.
    #[error("length mismatch: expected {expected} entries, got {got}")]
    LengthMismatch { expected: usize, got: usize },

    /// A probability vector had a negative entry.
    #[error("negative probability entry {value} at index {index}")]
    NegativeEntry { index: usize, value: f64 },

    /// A probability vector did not sum to one within tolerance.
    #[error("probabilities sum to {0}, expected 1 within 1e-9")]
    NotASimplex(f64),

    /// A context with no samples was used where samples are required.
    #[error("empty context {0}")]
    EmptyContext(usize),

    /// Dataset-level structural problem (dimensions, labels, emptiness).
    #[error("invalid dataset: {0}")]
    InvalidDataset(String),

    /// CSV parse failure, with the 1-based line number.
    #[error("csv line {line}: {msg}")]
    Csv { line: usize, msg: String },

    /// Generic invalid argument.
    #[error("invalid input: {0}")]
    InvalidInput(String),

    /// All excess values equal; the root equation for nu has no solution.
    #[error("constant excess profile: root equation for nu is undefined")]
    ConstantExcessProfile,

    /// Bracket expansion for the nu root ran out of doublings.
    #[error("root bracket not found after {0} expansions")]
    BracketNotFound(usize),

    /// The nu root sits closer to the pole than f64 can resolve.
    #[error("root below floating-point resolution above the pole (eps too large for this profile)")]
    RootBelowResolution,

    /// An inner solve failed during the outer descent.
    #[error("solver failure at outer iteration {iter}: {source}")]
    SolverAt {
        iter: usize,
        #[source]
        source: Box<Error>,
    },

    /// Filesystem problem.
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    /// True when the error indicates bad input data or arguments rather
    /// than a numerical failure inside a solver.
    pub fn is_input_error(&self) -> bool {
        match self {
            Error::ConfidenceOutOfRange(_)
            | Error::LengthMismatch { .. }
            | Error::NegativeEntry { .. }
            | Error::NotASimplex(_)
            | Error::EmptyContext(_)
            | Error::InvalidDataset(_)
            | Error::Csv { .. }
            | Error::InvalidInput(_)
            | Error::Io(_) => true,
            Error::ConstantExcessProfile
            | Error::BracketNotFound(_)
            | Error::RootBelowResolution
            | Error::SolverAt { .. } => false,
        }
    }
}
