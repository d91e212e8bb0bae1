use std::io;

use thiserror::Error;

use crate::phoneset::Inventory;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("unknown {inventory} phone `{label}`")]
    UnknownPhone { label: String, inventory: Inventory },

    #[error("config line {line}: {message}")]
    Config { line: usize, message: String },

    #[error("invariant violated: {0}")]
    Invariant(String),

    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("line {line}: `{text}` is not Devanagari")]
    Encoding { line: usize, text: String },

    #[error("empty word")]
    EmptyWord,

    #[error("invalid character {ch:?} in word `{word}`")]
    InvalidWord { word: String, ch: char },

    #[error("cannot align an empty sequence")]
    EmptySequence,

    #[error("no vowel nucleus in `{0}`")]
    NoNucleus(String),

    #[error("index {index} out of range for {len} phones")]
    IndexOutOfRange { index: usize, len: usize },

    #[error("unmapped codepoint U+{codepoint:04X} at offset {offset}")]
    UnmappedCodepoint { codepoint: u32, offset: usize },

    #[error("wildcard arity mismatch: {0}")]
    ArityMismatch(String),

    #[error("duplicate rule id `{0}`")]
    DuplicateRuleId(String),

    #[error("rules line {line}: {inner}")]
    Rule { line: usize, inner: Box<Error> },

    #[error(transparent)]
    Io(#[from] io::Error),
}

impl Error {
    pub(crate) fn parse(line: usize, message: impl Into<String>) -> Self {
        Error::Parse {
            line,
            message: message.into(),
        }
    }

    pub(crate) fn config(line: usize, message: impl Into<String>) -> Self {
        Error::Config {
            line,
            message: message.into(),
        }
    }

    pub(crate) fn at_rule_line(self, line: usize) -> Self {
        match self {
            e @ Error::Rule { .. } => e,
            e => Error::Rule {
                line,
                inner: Box::new(e),
            },
        }
    }

    /// The innermost error, looking through line wrappers.
    pub fn root(&self) -> &Error {
        match self {
            Error::Rule { inner, .. } => inner.root(),
            e => e,
        }
    }
}
