use std::path::PathBuf;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("empty corpus")]
    EmptyCorpus,

    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("invalid sentence {id}: {message}")]
    InvalidSentence { id: String, message: String },

    #[error("overlapping spans {first} and {second}")]
    OverlappingSpans { first: String, second: String },

    #[error("invalid template: {0}")]
    Template(String),

    #[error("no handcrafted question for entity type {0:?}")]
    MissingHandcrafted(String),

    #[error("mask fill failed: {0}")]
    MaskFill(String),

    #[error("prompt set has no question for entity type {0:?}")]
    MissingPrompt(String),

    #[error("invalid SQuAD data: {0}")]
    Squad(String),

    #[error("invalid logit record {qa_id}: {message}")]
    InvalidRecord { qa_id: String, message: String },

    #[error("logits line {line}: {message}")]
    LogitsLine { line: usize, message: String },

    #[error("numeric error: {0}")]
    Numeric(String),

    #[error("invalid decode config: {0}")]
    DecodeConfig(String),

    #[error("oracle: {0}")]
    Oracle(String),

    #[error("scoring request failed after {attempts} attempt(s): {message}")]
    Retriable { attempts: usize, message: String },

    #[error("scoring protocol error: {0}")]
    Protocol(String),

    #[error("evaluation error: {0}")]
    Eval(String),

    #[error("dev regime {regime} infeasible: {message}")]
    DevRegime { regime: String, message: String },

    #[error("config error: {0}")]
    Config(String),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

impl Error {
    /// Short machine-readable category, stable across releases.
    pub fn category(&self) -> &'static str {
        match self {
            Error::EmptyCorpus | Error::Parse { .. } | Error::InvalidSentence { .. } => "parse",
            Error::OverlappingSpans { .. } => "spans",
            Error::Template(_) | Error::MissingHandcrafted(_) | Error::MaskFill(_) => "prompt",
            Error::MissingPrompt(_) | Error::Squad(_) => "convert",
            Error::InvalidRecord { .. } | Error::LogitsLine { .. } => "logits",
            Error::DecodeConfig(_) | Error::Config(_) | Error::DevRegime { .. } => "config",
            Error::Oracle(_) => "oracle",
            Error::Numeric(_) => "numeric",
            Error::Retriable { .. } | Error::Protocol(_) => "scoring",
            Error::Eval(_) => "eval",
            Error::Io { .. } => "io",
            Error::Json(_) => "json",
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
