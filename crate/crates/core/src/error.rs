use thiserror::Error;

/// Errors raised by the toolkit. State and row indices are 1-based; `line`
/// fields are 1-based line numbers in the offending file.
#[derive(Debug, Error)]
pub enum Error {
    #[error("NonSquare: matrix is {rows}x{cols}")]
    NonSquare { rows: usize, cols: usize },

    #[error("NonFinite: entry ({row}, {col}) is not finite")]
    NonFinite { row: usize, col: usize },

    #[error("NegativeOffDiagonal: rate ({row}, {col}) is negative")]
    NegativeOffDiagonal { row: usize, col: usize },

    #[error("RowSumNonZero: row {row} sums to {sum}")]
    RowSumNonZero { row: usize, sum: f64 },

    #[error("DimensionMismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("NegativeTime: {0}")]
    NegativeTime(f64),

    #[error("InvalidProbability: {0}")]
    InvalidProbability(String),

    #[error("InvalidOccupation: {0}")]
    InvalidOccupation(String),

    #[error("NotUniquelyErgodic: stationary distribution is not unique; supply an initial distribution")]
    NotUniquelyErgodic,

    #[error("OutOfRange: {what} = {value} outside 1..={max}")]
    OutOfRange { what: &'static str, value: usize, max: usize },

    #[error("InvalidPermutation: {0}")]
    InvalidPermutation(String),

    #[error("InvalidFamily: {0}")]
    InvalidFamily(String),

    #[error("InvalidTrajectory: {0}")]
    InvalidTrajectory(String),

    #[error("InvalidConfig: {0}")]
    InvalidConfig(String),

    #[error("SimultaneousJump: both components change at time {time}")]
    SimultaneousJump { time: f64 },

    #[error("SharedJumpTime: both components jump at time {time}")]
    SharedJumpTime { time: f64 },

    #[error("EmptyInput")]
    EmptyInput,

    #[error("MixedDimensions: trajectories have {first} and {other} states")]
    MixedDimensions { first: usize, other: usize },

    #[error("ZeroHorizon")]
    ZeroHorizon,

    #[error("NotAbsolutelyContinuous: reference rate ({row}, {col}) is zero where the numerator rate is positive")]
    NotAbsolutelyContinuous { row: usize, col: usize },

    #[error("NegativeInput: {0}")]
    NegativeInput(f64),

    #[error("MalformedRow: line {line}: {reason}")]
    MalformedRow { line: usize, reason: String },

    #[error("NonMonotoneTime: line {line}")]
    NonMonotoneTime { line: usize },

    #[error("OffGridPrice: line {line}")]
    OffGridPrice { line: usize },

    #[error("InsufficientData: {0}")]
    InsufficientData(String),

    #[error("Internal: {0}")]
    Internal(String),

    #[error("Io: {0}")]
    Io(#[from] std::io::Error),

    #[error("Json: {0}")]
    Json(#[from] serde_json::Error),
}

impl Error {
    /// True for errors caused by malformed or insufficient input data, as
    /// opposed to invalid parameters or internal faults.
    pub fn is_data_error(&self) -> bool {
        matches!(
            self,
            Error::MalformedRow { .. }
                | Error::NonMonotoneTime { .. }
                | Error::OffGridPrice { .. }
                | Error::InsufficientData(_)
                | Error::EmptyInput
                | Error::MixedDimensions { .. }
                | Error::InvalidTrajectory(_)
                | Error::SimultaneousJump { .. }
                | Error::SharedJumpTime { .. }
                | Error::ZeroHorizon
                | Error::Io(_)
                | Error::Json(_)
        )
    }

    pub fn is_internal(&self) -> bool {
        matches!(self, Error::Internal(_))
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
