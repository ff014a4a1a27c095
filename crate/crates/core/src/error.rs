use std::io;
use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: io::Error,
    },

    #[error("{}: line {line} is not valid UTF-8", path.display())]
    Encoding { path: PathBuf, line: usize },

    #[error(
        "line count mismatch: {} has {source_lines} lines but {} has {target_lines}",
        source_path.display(),
        target_path.display()
    )]
    LineCountMismatch {
        source_path: PathBuf,
        source_lines: usize,
        target_path: PathBuf,
        target_lines: usize,
    },

    #[error("{}: dictionary has no usable entries", path.display())]
    EmptyDictionary { path: PathBuf },

    #[error("dimension mismatch{}: expected {expected}, found {found}", key_suffix(.key))]
    DimensionMismatch {
        key: Option<String>,
        expected: usize,
        found: usize,
    },

    #[error("zero vector cannot be normalized{}", key_suffix(.key))]
    ZeroVector { key: Option<String> },

    #[error("non-finite component{}", key_suffix(.key))]
    NonFinite { key: Option<String> },

    #[error("cannot embed empty text")]
    EmptyText,

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("no tag lexicon loaded for language `{lang}`")]
    MissingLexicon { lang: String },

    #[error("{}: {message}", path.display())]
    Format { path: PathBuf, message: String },

    #[error("span {start}..{end} out of bounds for sentence of length {len}")]
    SpanOutOfBounds {
        start: usize,
        end: usize,
        len: usize,
    },

    #[error("report labels differ: {left} vs {right}")]
    LabelMismatch { left: String, right: String },

    #[error("language tags differ: {left} vs {right}")]
    LanguageMismatch { left: String, right: String },

    #[error("configuration error: {0}")]
    Config(String),

    #[error("{stage}: {source}")]
    Stage {
        stage: &'static str,
        #[source]
        source: Box<Error>,
    },
}

fn key_suffix(key: &Option<String>) -> String {
    match key {
        Some(k) => format!(" for key `{k}`"),
        None => String::new(),
    }
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn format(path: impl Into<PathBuf>, message: impl Into<String>) -> Self {
        Error::Format {
            path: path.into(),
            message: message.into(),
        }
    }

    /// True when the error stems from configuration rather than input data.
    pub fn is_config(&self) -> bool {
        match self {
            Error::Config(_) => true,
            Error::Stage { source, .. } => source.is_config(),
            _ => false,
        }
    }
}

/// Attach a pipeline stage name to an error.
pub trait StageContext<T> {
    fn stage(self, stage: &'static str) -> Result<T>;
}

impl<T> StageContext<T> for Result<T> {
    fn stage(self, stage: &'static str) -> Result<T> {
        self.map_err(|e| Error::Stage {
            stage,
            source: Box::new(e),
        })
    }
}
