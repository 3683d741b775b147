use alloc::string::String;

use crate::level::Position;

pub type Result<T, E = Error> = core::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("parse error at line {line}, column {column}: {message}")]
    Parse {
        line: usize,
        column: usize,
        message: String,
    },
    #[error("position ({}, {}) is outside the {width}x{height} grid", .pos.row, .pos.col)]
    OutOfBounds {
        pos: Position,
        width: usize,
        height: usize,
    },
    #[error("invalid level: {0}")]
    InvalidLevel(String),
    #[error("invalid input: {0}")]
    Input(String),
    #[error("invalid action: {0}")]
    Action(String),
    #[error("shape mismatch: expected {expected}, got {actual}")]
    Shape { expected: usize, actual: usize },
    #[error("non-finite loss during update: {0}")]
    NonFinite(String),
    #[error("level generation failed after {0} attempts")]
    Generation(usize),
    #[error("episode already finished")]
    EpisodeDone,
}
