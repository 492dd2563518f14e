use std::io;

use thiserror::Error;

/// Coarse error category, used by front ends to pick exit codes.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ErrorKind {
    Argument,
    Validation,
    Numerical,
    Io,
}

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    Argument(String),

    #[error("{source_name}: line {line}: {message}")]
    Parse {
        source_name: String,
        line: usize,
        message: String,
    },

    #[error("validation failed: {0}")]
    Validation(String),

    #[error("character {character:?} of word {word:?} has no subword embedding")]
    Coverage { word: String, character: char },

    #[error("out-of-vocabulary word {word:?} on line {line}")]
    OutOfVocabulary { word: String, line: usize },

    #[error("numerical error: {0}")]
    Numerical(String),

    #[error("{context}: {source}")]
    Io {
        context: String,
        #[source]
        source: io::Error,
    },

    #[error("internal invariant violated: {0}")]
    Invariant(String),
}

impl Error {
    pub fn kind(&self) -> ErrorKind {
        match self {
            Error::Argument(_) => ErrorKind::Argument,
            Error::Parse { .. }
            | Error::Validation(_)
            | Error::Coverage { .. }
            | Error::OutOfVocabulary { .. }
            | Error::Invariant(_) => ErrorKind::Validation,
            Error::Numerical(_) => ErrorKind::Numerical,
            Error::Io { .. } => ErrorKind::Io,
        }
    }

    pub fn io(context: impl Into<String>, source: io::Error) -> Self {
        Error::Io {
            context: context.into(),
            source,
        }
    }

    pub(crate) fn parse(source_name: &str, line: usize, message: impl Into<String>) -> Self {
        Error::Parse {
            source_name: source_name.to_owned(),
            line,
            message: message.into(),
        }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
