//! Error type shared by every stage of the audit pipeline.

use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    /// A malformed input line.
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },

    /// Well-formed input that violates a data-model invariant.
    #[error("validation error: {0}")]
    Validation(String),

    /// A caller-supplied parameter is out of range.
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("need at least 2 runs to form pairs, got {0}")]
    InsufficientRuns(usize),

    #[error("no scorable topics remain for qrels '{0}'")]
    EmptyTopicSet(String),

    #[error("topic {topic} has no relevant documents")]
    NoRelevant { topic: String },

    #[error("non-finite score for run {run} on topic {topic}")]
    NonFiniteScore { run: String, topic: String },

    #[error("exact enumeration needs {assignments} assignments, limit is {limit}")]
    TooLarge { assignments: f64, limit: f64 },

    #[error("run pools differ between the two sides being compared")]
    PoolMismatch,

    #[error("rankings cover different item sets")]
    ItemMismatch,

    #[error("ranking is constant; Kendall's tau-b is undefined")]
    DegenerateRanking,

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{path}: {source}")]
    InFile {
        path: PathBuf,
        #[source]
        source: Box<Error>,
    },

    #[error("replicate {iteration}: {source}")]
    Replicate {
        iteration: usize,
        #[source]
        source: Box<Error>,
    },

    #[error("stage '{stage}' failed: {source}")]
    Stage {
        stage: &'static str,
        #[source]
        source: Box<Error>,
    },

    #[error("configuration error: {0}")]
    Config(String),

    #[error("{0}")]
    Stale(String),
}

impl Error {
    pub(crate) fn parse(line: usize, message: impl Into<String>) -> Self {
        Error::Parse {
            line,
            message: message.into(),
        }
    }

    pub fn in_file(self, path: impl Into<PathBuf>) -> Self {
        Error::InFile {
            path: path.into(),
            source: Box::new(self),
        }
    }

    pub fn at_stage(self, stage: &'static str) -> Self {
        Error::Stage {
            stage,
            source: Box::new(self),
        }
    }

    /// Process exit code: 2 for usage/configuration problems (including
    /// unreadable input paths), 1 for everything else.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Config(_) | Error::InvalidArgument(_) | Error::Io { .. } => 2,
            Error::InFile { source, .. }
            | Error::Stage { source, .. }
            | Error::Replicate { source, .. } => source.exit_code(),
            _ => 1,
        }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
