use std::io;
use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("I/O error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: io::Error,
    },

    #[error(transparent)]
    Stream(#[from] io::Error),

    #[error("empty corpus")]
    EmptyCorpus,

    /// A numeric argument outside the domain of a formula.
    #[error("domain error: {0}")]
    Domain(String),

    #[error("parse error at line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("invalid configuration: {key}: {message}")]
    Config { key: String, message: String },

    #[error("{0}")]
    Mismatch(String),

    #[error("non-finite value in {table} after {updates} updates")]
    NonFinite { table: &'static str, updates: u64 },

    #[error("mapping fit diverged: loss {loss} exceeds 1000x initial loss {initial}; use a smaller learning rate")]
    Diverged { loss: f64, initial: f64 },

    #[error("insufficient lexicon: {resolvable} resolvable pairs ({dropped} dropped), {required} required for training")]
    InsufficientLexicon {
        resolvable: usize,
        dropped: usize,
        required: usize,
    },

    #[error("word {word:?} not in vocabulary{}", fmt_suggestions(.suggestions))]
    OutOfVocabulary {
        word: String,
        suggestions: Vec<String>,
    },
}

fn fmt_suggestions(s: &[String]) -> String {
    if s.is_empty() {
        String::new()
    } else {
        format!("; did you mean: {}", s.join(", "))
    }
}

impl Error {
    pub fn io(path: impl Into<PathBuf>, source: io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub fn parse(line: usize, message: impl Into<String>) -> Self {
        Error::Parse {
            line,
            message: message.into(),
        }
    }

    pub fn config(key: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Config {
            key: key.into(),
            message: message.into(),
        }
    }
}
