use std::path::PathBuf;

use crate::corpus::TokenId;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("failed to read {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error(transparent)]
    Stream(#[from] std::io::Error),

    #[error("line {line}: {message}")]
    MalformedRecord { line: usize, message: String },

    #[error("corpus is empty")]
    EmptyCorpus,

    #[error("byte 0x{byte:02x} at offset {offset} cannot be encoded by this vocabulary")]
    UnencodableByte { byte: u8, offset: usize },

    #[error("token id {0} is not in the vocabulary")]
    UnknownToken(TokenId),

    #[error("n-gram arity {got} does not match table order {expected}")]
    ArityMismatch { expected: usize, got: usize },

    #[error("invalid parameter {name}: {message}")]
    InvalidParameter { name: &'static str, message: String },

    #[error("no merge candidates: every tokenized output is shorter than 2 tokens")]
    NoCandidates,

    #[error("embedding row for token {0} is missing")]
    MissingEmbeddingRow(TokenId),

    #[error("invalid vocabulary: {0}")]
    InvalidVocabulary(String),

    #[error("invalid {format} file: {message}")]
    InvalidFile { format: &'static str, message: String },

    #[error("invalid target distribution: {0}")]
    InvalidDistribution(String),

    #[error("no response for context of length {len} in offline target")]
    MissingResponse { len: usize },

    #[error("{0}")]
    InsufficientData(String),
}

impl Error {
    pub(crate) fn param(name: &'static str, message: impl Into<String>) -> Self {
        Error::InvalidParameter {
            name,
            message: message.into(),
        }
    }

    pub(crate) fn file(format: &'static str, message: impl Into<String>) -> Self {
        Error::InvalidFile {
            format,
            message: message.into(),
        }
    }

    /// True for errors caused by bad user input (missing files, malformed
    /// records, out-of-range parameters) rather than violated invariants.
    pub fn is_input_error(&self) -> bool {
        !matches!(self, Error::InvalidDistribution(_))
    }
}
