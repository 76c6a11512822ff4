use std::io;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    /// Operand shapes disagree.
    #[error("shape mismatch in {op}: {detail}")]
    Shape { op: &'static str, detail: String },

    /// Image dimensions are not a multiple of the cipher grid.
    #[error(
        "image {height}x{width} is not divisible by grid side {grid_side}; \
         resize to {suggest_h}x{suggest_w} (or pad by {pad_h} rows, {pad_w} columns)"
    )]
    GridIndivisible {
        height: usize,
        width: usize,
        grid_side: usize,
        suggest_h: usize,
        suggest_w: usize,
        pad_h: usize,
        pad_w: usize,
    },

    /// A caller supplied argument is out of its domain.
    #[error("invalid {name}: {reason}")]
    Invalid { name: &'static str, reason: String },

    /// Malformed file contents (PPM, key file, checkpoint, config).
    #[error("{format} parse error at byte {offset}: {reason}")]
    Format {
        format: &'static str,
        offset: usize,
        reason: String,
    },

    #[error("non-finite loss at epoch {epoch}, batch {batch}")]
    NonFinite { epoch: usize, batch: usize },

    /// Gradient for a registered parameter was never produced.
    #[error("missing gradient for parameter `{0}`")]
    MissingGradient(String),

    #[error("internal consistency failure: {0}")]
    Internal(String),

    #[error(transparent)]
    Io(#[from] io::Error),
}

impl Error {
    pub(crate) fn shape(op: &'static str, detail: impl Into<String>) -> Self {
        Error::Shape {
            op,
            detail: detail.into(),
        }
    }

    pub(crate) fn invalid(name: &'static str, reason: impl Into<String>) -> Self {
        Error::Invalid {
            name,
            reason: reason.into(),
        }
    }

    pub(crate) fn format(format: &'static str, offset: usize, reason: impl Into<String>) -> Self {
        Error::Format {
            format,
            offset,
            reason: reason.into(),
        }
    }
}
