use thiserror::Error;

/// Errors surfaced by the simulator and its file formats.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("value {value} out of range for {what}")]
    OutOfRange { what: &'static str, value: f64 },

    #[error("read voltage {0} V outside trace range")]
    TraceRange(f64),

    #[error("address ({row}, {col}, {channel}) out of bounds")]
    OutOfBounds { row: usize, col: usize, channel: usize },

    #[error("unit at ({row}, {col}, {channel}) has never been written")]
    Unwritten { row: usize, col: usize, channel: usize },

    #[error("program failure at level {target}: last reading {last_g:.4e} S (residual {residual:.3e}) after {iters} attempts")]
    ProgramFailure { target: u8, last_g: f64, residual: f64, iters: u32 },

    #[error("program failure at ({row}, {col}, {channel}), level {target}: last reading {last_g:.4e} S after {iters} attempts")]
    ProgramFailureAt { row: usize, col: usize, channel: usize, target: u8, last_g: f64, iters: u32 },

    #[error("restore to logic-0 failed after {0} attempts")]
    ResetFailure(u32),

    #[error("unit not in the logic-0 state (G = {0:.3e} S at read)")]
    PreconditionViolation(f64),

    #[error("final conductance {0:.3e} S not decodable")]
    DecodeFailure(f64),

    #[error("logic radix mismatch: {0} vs {1}")]
    RadixMismatch(u8, u8),

    #[error("unit pool exhausted")]
    PoolExhausted,

    #[error("parse error at byte {offset}: {msg}")]
    Parse { offset: usize, msg: String },

    #[error("unsupported format: {0}")]
    UnsupportedFormat(String),

    #[error("file checksum mismatch (stored {stored:08x}, computed {computed:08x})")]
    Checksum { stored: u32, computed: u32 },

    #[error("file version mismatch: {0}")]
    Version(String),

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
