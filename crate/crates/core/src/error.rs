//! Error types, one enum per subsystem.
//!
//! Scalar payloads are widened to f64 at construction so the enums stay
//! non-generic and cheap to thread through `?`. The one failure that must
//! carry state (a propagation abort hands back the partial record) is wrapped
//! at the call site instead; see `propagator::EvolveAbort`.

use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum FieldError {
    #[error("invalid grid: {0}")]
    InvalidGrid(String),
    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),
    #[error("field norm below representable floor; cannot normalize")]
    ZeroNorm,
    #[error("non-finite value in field data")]
    NonFinite,
}

#[derive(Debug, Error, PartialEq)]
pub enum PropagatorError {
    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),
    #[error("non-finite amplitude at step {step} (t = {time})")]
    NonFinite { step: usize, time: f64 },
    #[error("invalid propagator config: {0}")]
    InvalidConfig(String),
    #[error(transparent)]
    Field(#[from] FieldError),
}

#[derive(Debug, Error, PartialEq)]
pub enum GuidanceError {
    #[error("record has {got} frames, operation needs at least {needed}")]
    InsufficientFrames { needed: usize, got: usize },
    #[error("requested time {t} outside record window [{t_min}, {t_max}]")]
    OutOfWindow { t: f64, t_min: f64, t_max: f64 },
    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),
    #[error("invalid integration setup: {0}")]
    InvalidConfig(String),
    #[error(transparent)]
    Field(#[from] FieldError),
}

#[derive(Debug, Error, PartialEq)]
pub enum SampleError {
    #[error("density has no positive mass; cannot sample")]
    DegenerateDensity,
    #[error("empty input: {0}")]
    EmptyInput(String),
    #[error("histogram bin edges differ between operands")]
    BinMismatch,
    #[error("invalid bins: {0}")]
    InvalidBins(String),
}

#[derive(Debug, Error)]
pub enum ExperimentError {
    #[error("beams on side {side} unresolved at readout: overlap mass {overlap:.4} exceeds 0.01")]
    UnresolvedBeams { side: u8, overlap: f64 },
    #[error("invalid experiment config: {0}")]
    InvalidConfig(String),
    #[error("propagation aborted: {0}")]
    Propagator(#[from] PropagatorError),
    #[error(transparent)]
    Guidance(#[from] GuidanceError),
    #[error(transparent)]
    Sample(#[from] SampleError),
    #[error(transparent)]
    Field(#[from] FieldError),
}
