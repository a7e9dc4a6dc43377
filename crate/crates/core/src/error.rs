use std::io;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("shape mismatch{}: expected {expected}, got {actual}", layer_suffix(*.layer))]
    Shape {
        layer: Option<usize>,
        expected: usize,
        actual: usize,
    },

    #[error("invalid network spec: {0}")]
    Spec(String),

    #[error("non-finite value in {0}")]
    NonFinite(&'static str),

    #[error("{0} must not be empty")]
    Empty(&'static str),

    #[error("zero-norm vector in {0}")]
    ZeroNorm(&'static str),

    #[error("target is not a one-hot vector")]
    NotOneHot,

    #[error("invalid config: {0}")]
    Config(String),

    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("malformed {what}: {message}")]
    Format { what: &'static str, message: String },

    #[error("duplicate utterance id {0:?}")]
    DuplicateId(String),

    #[error("missing {} utterance(s) from {store}: {}", ids.len(), ids.join(", "))]
    MissingUtterances {
        store: &'static str,
        ids: Vec<String>,
    },

    #[error("no score for trial ({speaker}, {utterance})")]
    MissingScore { speaker: String, utterance: String },

    #[error("cannot sample scenario {0}: not enough matching utterances")]
    Unsatisfiable(String),

    #[error("non-finite loss at epoch {epoch}, step {step}")]
    NonFiniteLoss { epoch: usize, step: usize },

    #[error(transparent)]
    Io(#[from] io::Error),
}

fn layer_suffix(layer: Option<usize>) -> String {
    match layer {
        Some(i) => format!(" at layer {i}"),
        None => String::new(),
    }
}

impl Error {
    pub(crate) fn shape(expected: usize, actual: usize) -> Self {
        Error::Shape {
            layer: None,
            expected,
            actual,
        }
    }

    pub(crate) fn parse(line: usize, message: impl Into<String>) -> Self {
        Error::Parse {
            line,
            message: message.into(),
        }
    }

    pub(crate) fn format(what: &'static str, message: impl Into<String>) -> Self {
        Error::Format {
            what,
            message: message.into(),
        }
    }
}
