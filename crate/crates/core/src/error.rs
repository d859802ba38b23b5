use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("duplicate event id `{0}`")]
    DuplicateId(String),

    #[error("unknown event type(s): {}", .0.join(", "))]
    UnknownEventType(Vec<String>),

    #[error("malformed event: {0}")]
    MalformedEvent(String),

    #[error("invalid range: from {from} is after to {to}")]
    InvalidRange { from: i64, to: i64 },

    /// Wraps an error raised while reading a line-oriented file.
    #[error("line {line}: {source}")]
    AtLine {
        line: usize,
        #[source]
        source: Box<Error>,
    },

    #[error("parse error: {0}")]
    Parse(String),

    #[error("syntax error at byte {offset}: expected {expected}")]
    Syntax { offset: usize, expected: String },

    #[error("invalid window at byte {offset}: {message}")]
    Window { offset: usize, message: String },

    #[error("invalid window: {0}")]
    InvalidWindow(String),

    #[error("antecedent has no events in the ledger")]
    NoAntecedentEvents,

    #[error("ledger span is zero; rates are undefined")]
    DegenerateSpan,

    #[error("ledger is empty")]
    EmptyLedger,

    #[error("invalid config: {0}")]
    InvalidConfig(String),

    #[error("hypothesis has no antecedent occurrences to use as treated anchors")]
    NoTreatedAnchors,

    #[error("every stratum fell below the minimum stratum size")]
    AllStrataTooSmall,

    #[error("exclusion zones cover the whole ledger span; no control anchors can be sampled")]
    ExclusionExhausted,

    #[error("stratum {0} has no anchors on one side")]
    DegenerateStratum(String),

    #[error("invalid edge {key}: {message}")]
    InvalidEdge { key: String, message: String },

    #[error("graph was built against taxonomy {found}, expected {expected}")]
    TaxonomyMismatch { expected: String, found: String },

    #[error("unknown goal type `{0}`")]
    UnknownGoal(String),

    #[error("invalid scenario: {0}")]
    InvalidScenario(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn at_line(line: usize, err: Error) -> Self {
        Error::AtLine {
            line,
            source: Box::new(err),
        }
    }

    pub(crate) fn unknown_type(path: impl Into<String>) -> Self {
        Error::UnknownEventType(vec![path.into()])
    }

    /// Strips `AtLine` wrappers.
    pub fn root(&self) -> &Error {
        match self {
            Error::AtLine { source, .. } => source.root(),
            other => other,
        }
    }

    /// Variant name of the root error, e.g. `EmptyLedger`.
    pub fn kind(&self) -> &'static str {
        match self.root() {
            Error::DuplicateId(_) => "DuplicateId",
            Error::UnknownEventType(_) => "UnknownEventType",
            Error::MalformedEvent(_) => "MalformedEvent",
            Error::InvalidRange { .. } => "InvalidRange",
            Error::AtLine { .. } => "AtLine",
            Error::Parse(_) => "Parse",
            Error::Syntax { .. } => "Syntax",
            Error::Window { .. } | Error::InvalidWindow(_) => "InvalidWindow",
            Error::NoAntecedentEvents => "NoAntecedentEvents",
            Error::DegenerateSpan => "DegenerateSpan",
            Error::EmptyLedger => "EmptyLedger",
            Error::InvalidConfig(_) => "InvalidConfig",
            Error::NoTreatedAnchors => "NoTreatedAnchors",
            Error::AllStrataTooSmall => "AllStrataTooSmall",
            Error::ExclusionExhausted => "ExclusionExhausted",
            Error::DegenerateStratum(_) => "DegenerateStratum",
            Error::InvalidEdge { .. } => "InvalidEdge",
            Error::TaxonomyMismatch { .. } => "TaxonomyMismatch",
            Error::UnknownGoal(_) => "UnknownGoal",
            Error::InvalidScenario(_) => "InvalidScenario",
            Error::Io(_) => "Io",
            Error::Json(_) => "Json",
        }
    }
}
