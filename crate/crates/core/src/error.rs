use std::path::PathBuf;

use thiserror::Error;

use crate::admm::TraceRow;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid grid: {0}")]
    InvalidGrid(String),

    #[error("no input data")]
    NoInputData,

    #[error("invalid trajectory {vehicle_id}: {reason}")]
    InvalidTrajectory { vehicle_id: String, reason: String },

    #[error("detector row {row} out of range for grid with {n_x} rows")]
    RowOutOfRange { row: usize, n_x: usize },

    #[error("detector row {0} listed more than once")]
    DuplicateRow(usize),

    #[error("detector count {count} out of range 1..={n_x}")]
    DetectorCount { count: usize, n_x: usize },

    #[error("grid mismatch: {0}")]
    GridMismatch(String),

    #[error("shape mismatch: expected {expected:?}, found {found:?}")]
    ShapeMismatch {
        expected: (usize, usize),
        found: (usize, usize),
    },

    #[error("observation mask is empty")]
    EmptyMask,

    #[error("wave speed must be nonzero")]
    ZeroWaveSpeed,

    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("ASM requires exactly two a priori fields, got {0}")]
    AsmFieldCount(usize),

    #[error("ASM field order must be [free, cong]: wave speeds {free} and {cong} violate the sign convention")]
    AsmSignConvention { free: f64, cong: f64 },

    #[error("index {index} out of range for {len} weight fields")]
    IndexOutOfRange { index: usize, len: usize },

    #[error("no iterate yet")]
    NoIterate,

    #[error("divergence detected at iteration {iter}")]
    Divergence { iter: usize, trace: Vec<TraceRow> },

    #[error("undefined relative error: ground truth has zero norm")]
    UndefinedRelativeError,

    #[error("field contains missing values: {0}")]
    MissingValues(String),

    #[error("oracle requires exactly two a priori fields, got {0}")]
    OracleFieldCount(usize),

    #[error("{}, line {line}: {reason}", path.display())]
    Parse {
        path: PathBuf,
        line: usize,
        reason: String,
    },

    #[error("config: {0}")]
    Config(String),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    /// Process exit code: 1 for input/validation problems, 2 for runtime and solver failures.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Divergence { .. } | Error::Io { .. } => 2,
            _ => 1,
        }
    }

    pub(crate) fn param(name: &'static str, reason: impl Into<String>) -> Self {
        Error::InvalidParameter {
            name,
            reason: reason.into(),
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
