use alloc::string::String;

use crate::model::ModelError;

pub type Result<T, E = Error> = core::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    /// A precondition of an operation was violated by its caller.
    #[error("contract violation: {0}")]
    Contract(String),
    /// A suite file line failed to parse. Lines are 1-based.
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("integrity error: {0}")]
    Integrity(String),
    #[error("no JSON value found in model response")]
    NoJson { raw: String },
    #[error("lexicon {file} line {line}: {message}")]
    Lexicon {
        file: String,
        line: usize,
        message: String,
    },
    #[error("verification failed for case {case_id}: {message}")]
    Verification { case_id: String, message: String },
    #[error(transparent)]
    Model(#[from] ModelError),
    /// A model call failed while processing the named item.
    #[error("{context}: {source}")]
    ModelCall { context: String, source: ModelError },
}

impl Error {
    pub(crate) fn contract(msg: impl Into<String>) -> Self {
        Error::Contract(msg.into())
    }
}
