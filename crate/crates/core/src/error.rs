use thiserror::Error;

pub type Result<T, E = HawkesError> = core::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum HawkesError {
    #[error("event {index}: time {time} is not a finite number")]
    NonFiniteTime { index: usize, time: f64 },
    #[error("event {index}: time {time} precedes the previous event")]
    UnsortedTimes { index: usize, time: f64 },
    #[error("event {index}: a second event in dimension {dim} at time {time}")]
    DuplicateEvent { index: usize, dim: usize, time: f64 },
    #[error("event {index}: time {time} lies outside [0, {horizon}]")]
    OutOfHorizon {
        index: usize,
        time: f64,
        horizon: f64,
    },
    #[error("event {index}: dimension {dim} is out of range for K = {k}")]
    DimensionOutOfRange { index: usize, dim: usize, k: usize },
    #[error("horizon must be positive and finite, got {0}")]
    InvalidHorizon(f64),
    #[error("invalid {name}: {value}")]
    InvalidParameter { name: &'static str, value: f64 },
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("event {child}: parent {parent} does not occur strictly earlier")]
    InvalidParent { child: usize, parent: usize },
    #[error("excitation matrix has spectral radius {0} >= 1")]
    NonStationary(f64),
    #[error("the exact compensator has no conjugate conditional for beta")]
    ExactNotConjugate,
    #[error("interval lower bound {lo} exceeds upper bound {hi}")]
    InvalidInterval { lo: f64, hi: f64 },
    #[error("{0} must not be empty")]
    Empty(&'static str),
}
