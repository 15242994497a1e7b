use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("shape mismatch: {0}")]
    Shape(String),

    #[error("negative entry {value} at ({row}, {col})")]
    NegativeEntry { row: usize, col: usize, value: f64 },

    #[error("degenerate dictionary: every atom is zero")]
    DegenerateDictionary,

    #[error("invalid aggregate: {0}")]
    InvalidAggregate(String),

    #[error("invalid rank {rank}: must be smaller than {limit}")]
    InvalidRank { rank: usize, limit: usize },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("pixel ({row}, {col}) is not covered by any patch")]
    Coverage { row: usize, col: usize },

    #[error("insufficient data: {0}")]
    InsufficientData(String),

    #[error("parse error at line {line}: {message}")]
    Parse { line: u64, message: String },

    #[error("format error: {0}")]
    Format(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub(crate) fn shape(msg: impl Into<String>) -> Self {
        Error::Shape(msg.into())
    }

    /// Process exit code for the command-line tool.
    ///
    /// 0 success, 1 I/O, 2 parse or bad argument, 3 insufficient data,
    /// 4 dimension or format mismatch.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Io(_) => 1,
            Error::Parse { .. } | Error::InvalidArgument(_) => 2,
            Error::InsufficientData(_) => 3,
            Error::Shape(_)
            | Error::NegativeEntry { .. }
            | Error::DegenerateDictionary
            | Error::InvalidAggregate(_)
            | Error::InvalidRank { .. }
            | Error::Coverage { .. }
            | Error::Format(_) => 4,
        }
    }
}

impl From<image::ImageError> for Error {
    fn from(err: image::ImageError) -> Self {
        match err {
            image::ImageError::IoError(e) => Error::Io(e),
            other => Error::Format(other.to_string()),
        }
    }
}
