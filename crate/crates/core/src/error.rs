use thiserror::Error;

/// Errors raised by the operator, mesh, metric, physics and solver layers.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("size mismatch: expected {expected}, got {got}")]
    SizeMismatch { expected: usize, got: usize },

    #[error("invalid element {element}: {reason}")]
    InvalidElement { element: usize, reason: String },

    #[error("inadmissible state at element {element}, node {node}: {reason}")]
    InadmissibleState {
        element: usize,
        node: usize,
        reason: String,
    },

    #[error("missing neighbor data for element {element}, face {face}")]
    MissingNeighbor { element: usize, face: usize },

    #[error("pseudo-inverse failed for element {element}")]
    PseudoInverse { element: usize },

    #[error("bracket failure: {0}")]
    Bracket(String),

    #[error(
        "step size underflow at t = {t:e} (h = {h:e}, {accepted} accepted, {rejected} rejected)"
    )]
    StepUnderflow {
        t: f64,
        h: f64,
        accepted: usize,
        rejected: usize,
    },

    #[error("solver failure: {0}")]
    Solver(String),
}

pub type Result<T> = std::result::Result<T, Error>;
