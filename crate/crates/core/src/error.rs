use std::path::PathBuf;

use crate::pipeline::Phase;

pub type Result<T, E = Error> = std::result::Result<T, E>;

/// Every failure the library can report. The API layer maps each variant onto
/// a stable machine code (see [`Error::machine_code`]).
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("input contained no usable data: {0}")]
    EmptyInput(String),
    #[error("{path} is not valid UTF-8")]
    Encoding { path: PathBuf },
    #[error("invalid filter: {0}")]
    InvalidFilter(String),
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("incompatible vectors: {0}")]
    IncompatibleVectors(String),
    #[error("degenerate (zero-norm) vector")]
    DegenerateVector,
    #[error("context index is empty")]
    EmptyIndex,
    #[error("provider error: {message}")]
    Provider { message: String, retryable: bool },
    #[error("model output did not match the required schema after {attempts} attempts: {reason}")]
    StructuredOutput {
        raw_text: String,
        attempts: u32,
        reason: String,
    },
    #[error("template error: {0}")]
    Template(String),
    #[error("precondition failed: {0}")]
    PreconditionFailed(String),
    #[error("phase order violation: {0}")]
    PhaseOrder(String),
    #[error("upstream phases are stale: {0:?}")]
    StaleUpstream(Vec<Phase>),
    #[error("not found: {0}")]
    NotFound(String),
    #[error("quote not found in transcript {post_id}")]
    QuoteNotFound { post_id: String },
    #[error("invalid action: {0}")]
    InvalidAction(String),
    #[error("name already in use: {0}")]
    NameConflict(String),
    #[error("report refused, stale phases: {0:?}")]
    StaleState(Vec<Phase>),
    #[error("corrupt workspace data: {0}")]
    Corrupt(String),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub fn machine_code(&self) -> &'static str {
        match self {
            Error::Io { .. } => "io_error",
            Error::EmptyInput(_) => "empty_input",
            Error::Encoding { .. } => "encoding_error",
            Error::InvalidFilter(_) => "invalid_filter",
            Error::InvalidArgument(_) => "invalid_argument",
            Error::IncompatibleVectors(_) => "incompatible_vectors",
            Error::DegenerateVector => "degenerate_vector",
            Error::EmptyIndex => "empty_index",
            Error::Provider { .. } => "provider_error",
            Error::StructuredOutput { .. } => "structured_output_error",
            Error::Template(_) => "template_error",
            Error::PreconditionFailed(_) => "precondition_failed",
            Error::PhaseOrder(_) => "phase_order_violation",
            Error::StaleUpstream(_) => "stale_upstream",
            Error::NotFound(_) => "not_found",
            Error::QuoteNotFound { .. } => "quote_not_found",
            Error::InvalidAction(_) => "invalid_action",
            Error::NameConflict(_) => "name_conflict",
            Error::StaleState(_) => "stale_state",
            Error::Corrupt(_) => "corrupt_data",
            Error::Json(_) => "invalid_json",
        }
    }
}
