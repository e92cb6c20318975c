use thiserror::Error;

use crate::domain::ClassId;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("malformed label data: {len} bytes is not a multiple of 4")]
    MalformedLabels { len: usize },

    #[error("malformed {what} data: {len} bytes is not a multiple of {stride}")]
    MalformedBinary {
        what: &'static str,
        len: usize,
        stride: usize,
    },

    #[error("{field} value {value} at point {index} does not fit in 16 bits")]
    LabelOverflow {
        index: usize,
        field: &'static str,
        value: u32,
    },

    #[error("length mismatch for {what}: expected {expected}, found {found}")]
    LengthMismatch {
        what: &'static str,
        expected: usize,
        found: usize,
    },

    #[error("invalid taxonomy: {0}")]
    InvalidTaxonomy(String),

    #[error("class id {0} is not registered in the taxonomy")]
    UnknownClass(ClassId),

    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("non-finite {what} at point {index}")]
    NonFinite { what: &'static str, index: usize },

    #[error("confidence {value} at point {index} is outside [0, 1]")]
    InvalidConfidence { index: usize, value: f64 },

    #[error("{0} points need an instance but no centers were kept")]
    NoCenters(usize),

    #[error("empty input: {0}")]
    EmptyInput(&'static str),

    #[error("placed {placed} of {requested} instances before exhausting retries")]
    Placement { placed: usize, requested: usize },

    #[error("{}: {source}", path.display())]
    InFile {
        path: std::path::PathBuf,
        source: Box<Error>,
    },

    #[error("unknown {what} `{name}`")]
    UnknownName { what: &'static str, name: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn param(name: &'static str, reason: impl Into<String>) -> Self {
        Error::InvalidParameter {
            name,
            reason: reason.into(),
        }
    }

    pub fn in_file(self, path: impl Into<std::path::PathBuf>) -> Self {
        Error::InFile {
            path: path.into(),
            source: Box::new(self),
        }
    }

    pub(crate) fn check_len(what: &'static str, expected: usize, found: usize) -> Result<()> {
        if expected == found {
            Ok(())
        } else {
            Err(Error::LengthMismatch {
                what,
                expected,
                found,
            })
        }
    }
}
