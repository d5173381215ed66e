use std::fmt;

/// Errors produced by grid construction, the operators and the file formats.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("dimension mismatch: {what} (expected {expected}, found {found})")]
    DimensionMismatch {
        what: &'static str,
        expected: String,
        found: String,
    },
    #[error("non-finite value in {grid} at ({row},{col})")]
    NonFinite { grid: &'static str, row: usize, col: usize },
    #[error("non-positive depth at ({row},{col})")]
    NonPositiveDepth { row: usize, col: usize },
    #[error("invalid channel count {0} for image (expected 1 or 3)")]
    InvalidChannels(usize),
    #[error("time fraction {0} out of range [0, 1]")]
    InvalidTime(f64),
    #[error("negative-sum kernel vector at ({row},{col})")]
    NegativeKernelSum { row: usize, col: usize },
    #[error("grid {height}x{width} smaller than the {window}x{window} window")]
    GridTooSmall { height: usize, width: usize, window: usize },
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("invalid scene config: {0}")]
    InvalidConfig(String),
    #[error("{0}")]
    Format(FormatError),
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
    #[error("image codec error: {0}")]
    Codec(#[from] image::ImageError),
    #[error("{stage}: {source}")]
    Stage {
        stage: &'static str,
        #[source]
        source: Box<Error>,
    },
}

/// Malformed or unsupported file contents.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum FormatError {
    BadMagic,
    Truncated,
    TrailingData,
    DimensionOverflow(u64),
    UnsupportedPfmVariant(String),
    UnsupportedBitDepth,
    UnsupportedLayout(String),
    BadHeader(String),
}

impl fmt::Display for FormatError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            FormatError::BadMagic => write!(f, "bad magic"),
            FormatError::Truncated => write!(f, "truncated payload"),
            FormatError::TrailingData => write!(f, "size mismatch vs header: trailing data"),
            FormatError::DimensionOverflow(n) => write!(f, "dimension overflow: {n}"),
            FormatError::UnsupportedPfmVariant(h) => write!(f, "unsupported PFM variant {h:?}"),
            FormatError::UnsupportedBitDepth => write!(f, "unsupported bit depth"),
            FormatError::UnsupportedLayout(s) => write!(f, "unsupported channel layout: {s}"),
            FormatError::BadHeader(s) => write!(f, "bad header: {s}"),
        }
    }
}

impl From<FormatError> for Error {
    fn from(e: FormatError) -> Self {
        Error::Format(e)
    }
}

impl Error {
    pub(crate) fn mismatch(what: &'static str, expected: impl fmt::Display, found: impl fmt::Display) -> Self {
        Error::DimensionMismatch {
            what,
            expected: expected.to_string(),
            found: found.to_string(),
        }
    }

    /// Attaches a pipeline stage name to the error.
    pub fn in_stage(self, stage: &'static str) -> Self {
        Error::Stage {
            stage,
            source: Box::new(self),
        }
    }

    /// The innermost error, with stage wrappers removed.
    pub fn root(&self) -> &Error {
        match self {
            Error::Stage { source, .. } => source.root(),
            e => e,
        }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
