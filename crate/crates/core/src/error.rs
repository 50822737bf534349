use thiserror::Error;

/// Errors produced by the tree-space library.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("newick parse error at byte {pos}: {msg}")]
    Newick { pos: usize, msg: String },

    #[error("duplicate taxon label `{0}`")]
    DuplicateLabel(String),

    #[error("empty taxon label")]
    EmptyLabel,

    #[error("taxon label `{0}` is not in the taxon set")]
    UnknownLabel(String),

    #[error("tree has {found} taxa but the taxon set has {expected}")]
    TaxonCount { expected: usize, found: usize },

    #[error("need at least 4 taxa, found {0}")]
    TooFewTaxa(usize),

    #[error("at most {max} taxa are supported, found {found}")]
    TooManyTaxa { max: usize, found: usize },

    #[error("missing branch length for `{0}`")]
    MissingLength(String),

    #[error("branch length {0} must be positive")]
    NonPositiveLength(f64),

    #[error("trees are defined over different taxon sets")]
    TaxonMismatch,

    #[error("invalid split: {0}")]
    InvalidSplit(String),

    #[error("splits {0} and {1} are incompatible")]
    IncompatibleSplits(String, String),

    #[error("terminal split {0} cannot be exchanged")]
    TerminalSplit(String),

    #[error("invalid line: {0}")]
    InvalidLine(String),

    #[error("infeasible: {0}")]
    Infeasible(String),

    #[error("empty input: {0}")]
    EmptyInput(&'static str),

    #[error("degenerate data: {0}")]
    Degenerate(String),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("line {line}: {inner}")]
    AtLine { line: usize, inner: Box<Error> },
}

impl Error {
    /// Short machine-readable category, used by the CLI for its one-line error output.
    pub fn category(&self) -> &'static str {
        match self {
            Error::Newick { .. }
            | Error::DuplicateLabel(_)
            | Error::EmptyLabel
            | Error::UnknownLabel(_)
            | Error::TaxonCount { .. }
            | Error::MissingLength(_)
            | Error::NonPositiveLength(_) => "parse",
            Error::TooFewTaxa(_)
            | Error::TooManyTaxa { .. }
            | Error::TaxonMismatch
            | Error::InvalidSplit(_)
            | Error::IncompatibleSplits(..)
            | Error::TerminalSplit(_)
            | Error::InvalidLine(_)
            | Error::EmptyInput(_) => "validation",
            Error::Infeasible(_) => "infeasible",
            Error::Degenerate(_) => "degenerate",
            Error::InvalidParameter(_) => "parameter",
            Error::AtLine { inner, .. } => inner.category(),
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
