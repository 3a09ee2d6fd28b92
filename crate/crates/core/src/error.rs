use std::path::PathBuf;

use thiserror::Error;

use crate::llm::LlmError;

pub type Result<T, E = Error> = std::result::Result<T, E>;

/// Every failure the engine can report. Each variant maps to exactly one
/// machine code (see [`Error::code`]), which is what the HTTP layer and the
/// CLI surface to clients.
#[derive(Debug, Error)]
pub enum Error {
    // scene model
    #[error("an element named `{0}` already exists")]
    DuplicateName(String),
    #[error("`{0}` is not a valid element name (expected [A-Za-z][A-Za-z0-9_]*, not a reserved word)")]
    InvalidIdentifier(String),
    #[error("{0}")]
    MissingAsset(String),
    #[error("unknown element `{0}`")]
    UnknownElement(String),
    #[error("invalid transform: {0}")]
    InvalidTransform(String),
    #[error("a {kind} needs {expected} point(s), got {got}")]
    BadGeometryCardinality {
        kind: &'static str,
        expected: &'static str,
        got: usize,
    },
    #[error("unknown proxy label `{0}`")]
    UnknownLabel(String),
    #[error("invalid group membership: {0}")]
    InvalidGroup(String),

    // module registry
    #[error("a session for module `{0}` already exists")]
    DuplicateSession(String),
    #[error("unknown module `{0}`")]
    UnknownModule(String),

    // context repository
    #[error("summary class name `{found}` does not match element `{expected}`")]
    NameMismatch { expected: String, found: String },

    // prompt assembler
    #[error("the framework has already been selected ({0})")]
    AlreadySelected(String),
    #[error("no framework selected yet; describe the scene in the central module first")]
    FrameworkUnselected,
    #[error("prompt references unknown graphical input `{0}`")]
    UnknownProxyLabel(String),
    #[error("invalid framework keyword table: {0}")]
    InvalidKeywordTable(String),

    // code integrator
    #[error("response has no fenced `code` block")]
    MissingCodeBlock,
    #[error("response has no fenced `summary` block")]
    MissingSummaryBlock,
    #[error("summary block is not valid JSON: {0}")]
    MalformedSummaryJson(String),
    #[error("unexpected insertion block `{0}` in an element response")]
    UnexpectedDelta(String),
    #[error("expected class `{expected}`, found {}", found.as_deref().map(|f| format!("`{f}`")).unwrap_or_else(|| "no class declaration".into()))]
    ClassNameMismatch {
        expected: String,
        found: Option<String>,
    },
    #[error("code for `{element}` has invalid region markers: {detail}")]
    MissingMarkers { element: String, detail: String },
    #[error("insertion block targets unknown element `{0}`")]
    UnknownElementInDelta(String),
    #[error("transform anchor `{anchor}` missing from the variable region of `{element}`")]
    TransformAnchorMissing { element: String, anchor: String },
    #[error("invalid code unit `{unit}`: {detail}")]
    InvalidCodeUnit { unit: String, detail: String },

    // parameter extractor
    #[error("`{variable}` is not a slider parameter of `{element}`")]
    UnknownVariable { element: String, variable: String },
    #[error("value {value} for `{variable}` is outside [{min}, {max}]")]
    OutOfRange {
        variable: String,
        value: f64,
        min: f64,
        max: f64,
    },

    // llm backend
    #[error(transparent)]
    Llm(#[from] LlmError),

    // project store
    #[error("i/o failure at {}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("project format version {found} is not supported (expected {expected})")]
    VersionMismatch { found: u32, expected: u32 },
    #[error("corrupt project file {}: {detail}", path.display())]
    CorruptFile { path: PathBuf, detail: String },

    // scenario replay
    #[error("scenario error: {0}")]
    Scenario(String),
    #[error("scenario assertion failed at step {step}: {detail}")]
    AssertionFailed { step: usize, detail: String },
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn corrupt(path: impl Into<PathBuf>, detail: impl std::fmt::Display) -> Self {
        Error::CorruptFile {
            path: path.into(),
            detail: detail.to_string(),
        }
    }

    /// Stable machine-readable code for this error.
    pub fn code(&self) -> &'static str {
        match self {
            Error::DuplicateName(_) => "duplicate-name",
            Error::InvalidIdentifier(_) => "invalid-identifier",
            Error::MissingAsset(_) => "missing-asset",
            Error::UnknownElement(_) => "unknown-element",
            Error::InvalidTransform(_) => "invalid-transform",
            Error::BadGeometryCardinality { .. } => "bad-geometry-cardinality",
            Error::UnknownLabel(_) => "unknown-label",
            Error::InvalidGroup(_) => "invalid-group",
            Error::DuplicateSession(_) => "duplicate-session",
            Error::UnknownModule(_) => "unknown-module",
            Error::NameMismatch { .. } => "name-mismatch",
            Error::AlreadySelected(_) => "already-selected",
            Error::FrameworkUnselected => "framework-unselected",
            Error::UnknownProxyLabel(_) => "unknown-proxy-label",
            Error::InvalidKeywordTable(_) => "invalid-keyword-table",
            Error::MissingCodeBlock => "missing-code-block",
            Error::MissingSummaryBlock => "missing-summary-block",
            Error::MalformedSummaryJson(_) => "malformed-summary-json",
            Error::UnexpectedDelta(_) => "unexpected-delta",
            Error::ClassNameMismatch { .. } => "class-name-mismatch",
            Error::MissingMarkers { .. } => "missing-markers",
            Error::UnknownElementInDelta(_) => "unknown-element-in-delta",
            Error::TransformAnchorMissing { .. } => "transform-anchor-missing",
            Error::InvalidCodeUnit { .. } => "invalid-code-unit",
            Error::UnknownVariable { .. } => "unknown-variable",
            Error::OutOfRange { .. } => "out-of-range",
            Error::Llm(e) => e.code(),
            Error::Io { .. } => "io-failure",
            Error::VersionMismatch { .. } => "version-mismatch",
            Error::CorruptFile { .. } => "corrupt-file",
            Error::Scenario(_) => "scenario-error",
            Error::AssertionFailed { .. } => "assertion-failed",
        }
    }

    /// True for errors caused by the caller's input (as opposed to backend or
    /// storage failures).
    pub fn is_client_error(&self) -> bool {
        !matches!(
            self,
            Error::Llm(_) | Error::Io { .. } | Error::CorruptFile { .. }
        )
    }
}
