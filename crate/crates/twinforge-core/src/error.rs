use alloc::string::String;
use core::fmt;

/// Errors raised by the numerical core.
#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub enum CoreError {
    /// A configuration violates one of its invariants.
    InvalidConfig(String),
    /// The drawn plateau schedule does not fit into the signal duration.
    DurationTooShort { needed: f64, available: f64 },
    /// A query time lies outside the sampled span.
    OutOfRange { t: f64, t_min: f64, t_max: f64 },
    /// The explicit time step violates the diffusion stability bound.
    UnstableTimestep { dt: f64, dt_max: f64 },
    /// A state or output became non-finite during integration.
    NonFiniteState { step: usize },
    InvalidDimension(String),
    ShapeMismatch { expected: (usize, usize), got: (usize, usize) },
    /// A reference sample is zero, so a relative error is undefined.
    ZeroReference,
    /// A reference channel is constant, so R^2 is undefined.
    ConstantReference { channel: usize },
    EmptyGroup,
    EmptyScenarios,
    GridMismatch,
    /// Jump-based features are only defined for APRBS-family signals.
    MissingJumps,
    KTooLarge { k: usize, count: usize },
    /// All medians coincide; equal-width bins cannot be formed.
    DegenerateRange,
    ConstantInput,
    LengthMismatch { left: usize, right: usize },
    MissingRom(String),
}

impl fmt::Display for CoreError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CoreError::InvalidConfig(msg) => write!(f, "invalid configuration: {msg}"),
            CoreError::DurationTooShort { needed, available } => write!(
                f,
                "signal duration too short: plateaus need {needed} s, have {available} s"
            ),
            CoreError::OutOfRange { t, t_min, t_max } => {
                write!(f, "time {t} outside sampled span [{t_min}, {t_max}]")
            }
            CoreError::UnstableTimestep { dt, dt_max } => {
                write!(f, "internal time step {dt} s exceeds stability bound {dt_max} s")
            }
            CoreError::NonFiniteState { step } => {
                write!(f, "non-finite state encountered at step {step}")
            }
            CoreError::InvalidDimension(msg) => write!(f, "invalid dimension: {msg}"),
            CoreError::ShapeMismatch { expected, got } => write!(
                f,
                "shape mismatch: expected {}x{}, got {}x{}",
                expected.0, expected.1, got.0, got.1
            ),
            CoreError::ZeroReference => write!(f, "reference contains a zero sample"),
            CoreError::ConstantReference { channel } => {
                write!(f, "reference channel {channel} is constant")
            }
            CoreError::EmptyGroup => write!(f, "empty metric group"),
            CoreError::EmptyScenarios => write!(f, "no training scenarios supplied"),
            CoreError::GridMismatch => write!(f, "time grids do not match"),
            CoreError::MissingJumps => write!(f, "signal has no jump schedule"),
            CoreError::KTooLarge { k, count } => {
                write!(f, "cannot select {k} of {count} data sets")
            }
            CoreError::DegenerateRange => write!(f, "all medians are equal"),
            CoreError::ConstantInput => write!(f, "input series is constant"),
            CoreError::LengthMismatch { left, right } => {
                write!(f, "length mismatch: {left} vs {right}")
            }
            CoreError::MissingRom(id) => write!(f, "no model available for data set {id}"),
        }
    }
}

pub type CoreResult<T> = Result<T, CoreError>;
