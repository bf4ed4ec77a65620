//! Crate-wide error type.

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    /// Input was not valid JSON for the documented schema.
    #[error("parse error at line {line}, column {column} (byte offset {offset}): {message}")]
    Parse {
        line: usize,
        column: usize,
        offset: usize,
        message: String,
    },

    /// A structural reference points at a node id that does not exist.
    #[error("dangling node reference {id:?} in function {function:?}")]
    DanglingReference { function: String, id: String },

    /// Schema-level validation failure (bad attribute shape, empty kind, ...).
    #[error("invalid document: {0}")]
    InvalidDocument(String),

    #[error("graph has no nodes")]
    EmptyGraph,

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("invalid partition: {0}")]
    InvalidPartition(String),

    #[error("power iteration did not converge: residual {residual} after {iterations} iterations")]
    PageRankDiverged { residual: f64, iterations: usize },

    /// Two vectorized artifacts were produced under different feature spaces.
    #[error("schema mismatch: expected {expected}, found {found}")]
    SchemaMismatch { expected: String, found: String },

    #[error("training data contains a single class; both labels are required")]
    SingleClass,

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("model container error: {0}")]
    ModelFormat(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    /// Wraps a `serde_json` failure, preserving position information.
    pub(crate) fn from_json(err: serde_json::Error, input: &[u8]) -> Self {
        let line = err.line();
        let column = err.column();
        Error::Parse {
            line,
            column,
            offset: byte_offset(input, line, column),
            message: err.to_string(),
        }
    }
}

/// Converts a 1-based (line, column) position into a byte offset.
fn byte_offset(input: &[u8], line: usize, column: usize) -> usize {
    let mut line_start = 0usize;
    if line > 1 {
        let mut current_line = 1usize;
        for (i, b) in input.iter().enumerate() {
            if *b == b'\n' {
                current_line += 1;
                if current_line == line {
                    line_start = i + 1;
                    break;
                }
            }
        }
    }
    (line_start + column.saturating_sub(1)).min(input.len())
}
