use std::io;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    /// Malformed or out-of-range input data.
    #[error("input error: {0}")]
    Input(String),

    /// A text file could not be parsed; `line` is 1-based.
    #[error("parse error at line {line}: {message}")]
    Parse { line: usize, message: String },

    /// A caller-supplied argument is outside its domain.
    #[error("invalid argument: {0}")]
    Argument(String),

    /// An allocation disagrees with the activity pattern or with itself.
    #[error("consistency error: {0}")]
    Consistency(String),

    #[error(transparent)]
    Io(#[from] io::Error),
}
