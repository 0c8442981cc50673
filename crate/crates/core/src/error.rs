use thiserror::Error;

use crate::number::Number;

#[derive(Debug, Error)]
pub enum Error {
    #[error("parse error: {0}")]
    Parse(String),

    #[error("division by zero")]
    DivisionByZero,

    #[error("invalid state space: {0}")]
    InvalidSpace(String),

    #[error("unknown atom {0:?}")]
    UnknownAtom(String),

    #[error("unknown segment {0:?}")]
    UnknownSegment(String),

    #[error("unknown action {0:?}")]
    UnknownAction(String),

    #[error("invalid measure: {0}")]
    InvalidMeasure(String),

    #[error("domain mismatch: {left} vs {right}")]
    DomainMismatch { left: String, right: String },

    #[error("image {value} lies outside segment {segment:?}")]
    OutsideSegment { segment: String, value: String },

    #[error("quadrature for {function:?} did not converge: estimate {estimate} (error estimate {error_estimate:e})")]
    QuadratureFailed { function: String, estimate: f64, error_estimate: f64 },

    #[error("test function {function:?} returned {value} outside its declared bound {bound}")]
    BoundViolation { function: String, value: f64, bound: f64 },

    #[error("cannot integrate: {0}")]
    Unsupported(String),

    #[error("invalid model: {0}")]
    InvalidModel(String),

    #[error("invalid strategy: {0}")]
    InvalidStrategy(String),

    #[error("strategy does not cover state {0:?}")]
    MissingState(String),

    #[error("mass {residual} remains in the state space after {horizon} stages")]
    UnrollIncomplete { horizon: usize, residual: Number },

    #[error("model is not atomic on the reachable set: {0}")]
    NotAtomic(String),

    #[error("state {0:?} is never left under the strategy; occupation is infinite")]
    NotAbsorbing(String),

    #[error("residual mass {residual} escaped the truncation and no occupation cap was supplied")]
    UncertifiedTail { residual: Number },

    #[error("truncation exhausted after {stages} stages with residual mass {residual}")]
    TruncationExhausted { stages: usize, residual: Number },

    #[error("process reached frontier state {0:?} whose dynamics are not materialized")]
    FrontierReached(String),

    #[error("value function undefined at {0:?}")]
    UndefinedValue(String),

    #[error("invalid test battery: {0}")]
    InvalidBattery(String),

    #[error("invalid sequence: {0}")]
    InvalidSequence(String),

    #[error("determinism defect requires a finite action space")]
    IntervalActions,

    #[error("unknown zoo entry or strategy: {0}")]
    UnknownName(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
