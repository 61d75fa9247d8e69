use std::path::PathBuf;

use docex_core::Violation;
use thiserror::Error;

use crate::protocol::BridgeError;

#[derive(Debug, Error)]
pub enum Error {
    /// The cause is part of the message rather than the error chain.
    #[error("{path}: {cause}")]
    Io { path: PathBuf, cause: std::io::Error },
    #[error("{path}: parse error at line {line}, column {column} (byte offset {offset}): {message}")]
    Parse {
        path: PathBuf,
        line: usize,
        column: usize,
        offset: usize,
        message: String,
    },
    #[error("dataset failed validation with {} violation(s); first: {}", .0.len(), .0[0])]
    Invalid(Vec<Violation>),
    #[error("{0}")]
    Format(String),
    #[error("config: {0}")]
    Config(String),
    #[error(transparent)]
    Bridge(#[from] BridgeError),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

impl Error {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io { path: path.into(), cause: source }
    }

    /// Converts a `serde_json` error into a located parse error.
    pub fn json(path: impl Into<PathBuf>, content: &str, err: serde_json::Error) -> Self {
        let (line, column) = (err.line(), err.column());
        Error::Parse { path: path.into(), line, column, offset: byte_offset(content, line, column), message: err.to_string() }
    }
}

/// Byte offset of a 1-based `(line, column)` position, clamped to the content.
pub fn byte_offset(content: &str, line: usize, column: usize) -> usize {
    if line == 0 {
        return 0;
    }
    let line_start: usize = content.split_inclusive('\n').take(line - 1).map(str::len).sum();
    (line_start + column.saturating_sub(1)).min(content.len())
}

pub(crate) fn read_to_string(path: &std::path::Path) -> Result<String> {
    std::fs::read_to_string(path).map_err(|e| Error::io(path, e))
}

pub(crate) fn write_string(path: &std::path::Path, content: &str) -> Result<()> {
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        std::fs::create_dir_all(parent).map_err(|e| Error::io(parent, e))?;
    }
    std::fs::write(path, content).map_err(|e| Error::io(path, e))
}
