use std::path::PathBuf;

use thiserror::Error;

use crate::catalog::{ItemId, UserId};

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("cannot read {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{path}: {message}")]
    Parse { path: PathBuf, message: String },

    #[error("{path}: required column `{column}` is missing from the header")]
    MissingColumn { path: PathBuf, column: &'static str },

    #[error("duplicate item_id `{0}` in item file")]
    DuplicateItem(ItemId),

    #[error("unknown user `{0}`")]
    UnknownUser(UserId),

    #[error("unknown item `{0}`")]
    UnknownItem(ItemId),

    #[error("user `{user}`: {what}")]
    MissingUserData { user: UserId, what: String },

    #[error("{0} must not be empty")]
    EmptyInput(&'static str),

    #[error("only {eligible} users have more than {holdout} transactions, {requested} requested")]
    InsufficientUsers {
        eligible: usize,
        requested: usize,
        holdout: usize,
    },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("invalid configuration:\n  - {}", .0.join("\n  - "))]
    InvalidConfig(Vec<String>),

    #[error("internal invariant violated: {0}")]
    Invariant(String),

    #[error("{context}: {source}")]
    Context {
        context: String,
        #[source]
        source: Box<Error>,
    },
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn parse(path: impl Into<PathBuf>, message: impl Into<String>) -> Self {
        Error::Parse {
            path: path.into(),
            message: message.into(),
        }
    }

    /// True when the error reflects a broken internal guarantee rather than bad input.
    pub fn is_internal(&self) -> bool {
        match self {
            Error::Invariant(_) => true,
            Error::Context { source, .. } => source.is_internal(),
            _ => false,
        }
    }

    /// Wraps the error with a short description of what was being processed.
    pub fn context(self, context: impl Into<String>) -> Self {
        Error::Context {
            context: context.into(),
            source: Box::new(self),
        }
    }
}
