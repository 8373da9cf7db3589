use std::path::PathBuf;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("invalid split sizes: n={n}, n1={n1} (need 1 <= n1 <= n-2)")]
    InvalidSizes { n: usize, n1: usize },

    #[error("invalid dataset: {0}")]
    InvalidDataset(String),

    #[error("degenerate input: {0}")]
    DegenerateInput(String),

    #[error("training data contains a single class; logistic fits need both outcomes in every training set")]
    SingleClassTraining,

    #[error("dimension mismatch: expected {expected} features, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("mismatched data: {0}")]
    MismatchedData(String),

    #[error("degenerate test set: {negatives} negatives, {positives} positives; the c-index needs both classes in every test set, so use a larger test set or more balanced data")]
    DegenerateTestSet { negatives: usize, positives: usize },

    #[error("too few splits: need at least {needed}, got {got}")]
    TooFewSplits { needed: usize, got: usize },

    #[error("degenerate variance: naive variance and between-split variance are both zero")]
    DegenerateVariance,

    #[error("numerical failure: {0}")]
    NumericalFailure(String),

    #[error("insufficient posterior draws: need at least {needed} after burn-in, got {got}")]
    InsufficientDraws { needed: usize, got: usize },

    #[error("degenerate classes: {0}")]
    DegenerateClasses(String),

    #[error("insufficient data: {0}")]
    InsufficientData(String),

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("parse error at line {line}, column {column}: {message}")]
    Parse {
        line: u64,
        column: String,
        message: String,
    },

    #[error("missing column `{0}`")]
    MissingColumn(String),

    #[error("target column `{column}` is not binary at line {line}: {value}")]
    NonBinaryTarget {
        column: String,
        line: u64,
        value: String,
    },

    #[error("schema mismatch: {0}")]
    SchemaMismatch(String),

    #[error("study aborted: {failed} of {reps} replications failed (first: {first})")]
    StudyAborted {
        failed: usize,
        reps: usize,
        first: String,
    },

    #[error("{stage}{}: {source}", split.map(|k| format!(" (split {k})")).unwrap_or_default())]
    Context {
        stage: &'static str,
        split: Option<usize>,
        #[source]
        source: Box<Error>,
    },

    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("serialization error: {0}")]
    Serialization(String),
}

/// Coarse error classes, used by the CLI to pick an exit status.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorClass {
    Config,
    Data,
    Numerical,
    Io,
}

impl Error {
    pub fn context(self, stage: &'static str, split: Option<usize>) -> Error {
        Error::Context {
            stage,
            split,
            source: Box::new(self),
        }
    }

    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Error {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// The innermost error, skipping stage annotations.
    pub fn root(&self) -> &Error {
        match self {
            Error::Context { source, .. } => source.root(),
            e => e,
        }
    }

    pub fn class(&self) -> ErrorClass {
        match self.root() {
            Error::InvalidSizes { .. }
            | Error::InvalidConfig(_)
            | Error::MissingColumn(_)
            | Error::SchemaMismatch(_) => ErrorClass::Config,
            Error::InvalidDataset(_)
            | Error::DegenerateInput(_)
            | Error::SingleClassTraining
            | Error::DimensionMismatch { .. }
            | Error::MismatchedData(_)
            | Error::DegenerateTestSet { .. }
            | Error::TooFewSplits { .. }
            | Error::DegenerateClasses(_)
            | Error::InsufficientData(_)
            | Error::Parse { .. }
            | Error::NonBinaryTarget { .. }
            | Error::StudyAborted { .. } => ErrorClass::Data,
            Error::DegenerateVariance
            | Error::NumericalFailure(_)
            | Error::InsufficientDraws { .. } => ErrorClass::Numerical,
            Error::Io { .. } | Error::Serialization(_) => ErrorClass::Io,
            Error::Context { .. } => unreachable!("root() strips context"),
        }
    }
}

/// Attach a stage (and optional split index) to the error of a result.
pub(crate) trait ResultExt<T> {
    fn stage(self, stage: &'static str, split: Option<usize>) -> Result<T>;
}

impl<T> ResultExt<T> for Result<T> {
    fn stage(self, stage: &'static str, split: Option<usize>) -> Result<T> {
        self.map_err(|e| e.context(stage, split))
    }
}
