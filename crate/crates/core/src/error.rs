//! Error type shared by every module in the crate.

use thiserror::Error;

/// Unified error for constructing domain values, parsing model output,
/// loading datasets, and running evaluations.
#[derive(Debug, Error)]
pub enum Error {
    /// A bounding box violated `0 <= x0 <= x1 <= 1` / `0 <= y0 <= y1 <= 1`.
    #[error("invalid bounding box [{x0}, {y0}, {x1}, {y1}]: {reason}")]
    InvalidBox {
        x0: f64,
        y0: f64,
        x1: f64,
        y1: f64,
        reason: &'static str,
    },

    /// Two temporal supports with different sampling rates were combined.
    #[error("sampling rate mismatch: {left} Hz vs {right} Hz")]
    RateMismatch { left: u32, right: u32 },

    /// A tube was built with a different number of boxes and timestamps.
    #[error("tube has {n_boxes} boxes for {n_timestamps} timestamps")]
    TubeShape { n_boxes: usize, n_timestamps: usize },

    /// An interval was non-finite, negative, or reversed.
    #[error("malformed interval [{start}, {end}]: {reason}")]
    MalformedInterval {
        start: f64,
        end: f64,
        reason: &'static str,
    },

    /// A ground-truth annotation violated a task precondition.
    #[error("invalid annotation for query {query_id:?}: {reason}")]
    InvalidAnnotation { query_id: String, reason: String },

    /// A metric that needs at least one sample was given none.
    #[error("empty query set: {context}")]
    EmptyQuerySet { context: &'static str },

    /// Raw model output could not be normalised into a canonical value.
    #[error("{dialect} payload parse error: {message} (payload excerpt: {excerpt:?})")]
    DialectParse {
        dialect: &'static str,
        message: String,
        excerpt: String,
    },

    /// A line of a JSONL file violated the schema.
    #[error("{path}:{line}: {message}")]
    Schema {
        path: String,
        line: usize,
        message: String,
    },

    /// The same `query_id` appeared twice in an annotation file.
    #[error("duplicate query_id {query_id:?} (lines {first_line} and {second_line})")]
    DuplicateQueryId {
        query_id: String,
        first_line: usize,
        second_line: usize,
    },

    /// Predictions referenced query ids absent from the annotation file.
    #[error("predictions reference unknown query ids: {}", ids.join(", "))]
    UnknownQueryIds { ids: Vec<String> },

    /// A record's task did not match the task being evaluated.
    #[error("task mismatch for query {query_id:?}: evaluating {expected} but found {found}")]
    TaskMismatch {
        query_id: String,
        expected: String,
        found: String,
    },

    /// A run was misconfigured (missing dialect, bad worker count, ...).
    #[error("invalid configuration: {0}")]
    Config(String),

    /// Underlying I/O failure, annotated with the path involved. The cause
    /// is part of the message itself, so reporters that walk source chains
    /// do not print it twice.
    #[error("{path}: {reason}")]
    Io {
        path: String,
        reason: std::io::Error,
    },
}

impl Error {
    /// True for errors caused by malformed model output rather than by the
    /// caller's inputs; such records are scored zero instead of aborting.
    pub fn is_parse_failure(&self) -> bool {
        matches!(self, Error::DialectParse { .. })
    }
}

/// Truncates a raw payload for inclusion in error messages.
pub(crate) fn excerpt(payload: &str) -> String {
    const MAX: usize = 80;
    let trimmed = payload.trim();
    if trimmed.chars().count() <= MAX {
        trimmed.to_string()
    } else {
        let head: String = trimmed.chars().take(MAX).collect();
        format!("{head}…")
    }
}
