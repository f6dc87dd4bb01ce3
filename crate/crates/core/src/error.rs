use alloc::string::String;

/// Errors raised by model construction, evaluation and simulation.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, found {found}")]
    Dimension { expected: usize, found: usize },
    #[error("cannot take the tensor product of a vector and an operator")]
    Kind,
    #[error("index {index} out of range (len {len})")]
    Index { index: usize, len: usize },
    #[error("invariant violated: {0}")]
    Invariant(String),
    #[error("label error: {0}")]
    Label(String),
    #[error("out of domain: {0}")]
    Domain(String),
    #[error("degenerate input: {0}")]
    Degenerate(String),
    #[error("observation has zero likelihood everywhere on the grid")]
    DegenerateEvidence,
    #[error("bad configuration: {0}")]
    Config(String),
    #[error("malformed event log: {0}")]
    Structure(String),
}

impl Error {
    /// Short machine-readable tag for diagnostics.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::Dimension { .. } => "dimension",
            Error::Kind => "kind",
            Error::Index { .. } => "index",
            Error::Invariant(_) => "invariant",
            Error::Label(_) => "label",
            Error::Domain(_) => "domain",
            Error::Degenerate(_) => "degenerate",
            Error::DegenerateEvidence => "degenerate_evidence",
            Error::Config(_) => "config",
            Error::Structure(_) => "structure",
        }
    }
}

pub type Result<T> = core::result::Result<T, Error>;

pub(crate) fn label_err(label: &str) -> Error {
    Error::Label(alloc::format!("unknown label `{label}`"))
}
