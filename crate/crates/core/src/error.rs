use crate::domain::LabelPair;
use thiserror::Error;

pub type Result<T, E = LccError> = std::result::Result<T, E>;

/// Everything that can go wrong inside the library.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum LccError {
    #[error("dataset is empty")]
    EmptyDataset,
    #[error("sample {row} has {found} features, expected {expected}")]
    RaggedFeatures {
        row: usize,
        expected: usize,
        found: usize,
    },
    #[error("label {label} out of range for {class_count} classes")]
    LabelOutOfRange { label: usize, class_count: usize },
    #[error("the label names table has {names} entries but {class_count} classes were requested")]
    LabelNameCount { names: usize, class_count: usize },
    #[error("{expected} labels expected, got {found}")]
    LengthMismatch { expected: usize, found: usize },
    #[error("a label pair needs two distinct labels, got ({0}, {0})")]
    SelfPair(usize),
    #[error("class {0} has no samples")]
    MissingClass(usize),
    #[error("loss became non-finite at iteration {iteration}")]
    NonFiniteLoss { iteration: usize },
    #[error("feature dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error("at least two classes are required, got {0}")]
    TooFewClasses(usize),
    #[error("all class means coincide; the similarity matrix cannot be normalized")]
    DegenerateMeans,
    #[error("threshold {0} is outside [0, 1]")]
    InvalidThreshold(f64),
    #[error("local model for pair {pair}: {source}")]
    LocalModel {
        pair: LabelPair,
        #[source]
        source: Box<LccError>,
    },
    #[error("malformed document: {0}")]
    MalformedDocument(String),
    #[error("unsupported document version {found} (expected {expected})")]
    VersionMismatch { found: u64, expected: u64 },
    #[error("invariant violated: {0}")]
    InvariantViolation(String),
    #[error("cosine similarity is undefined for a zero-norm vector")]
    ZeroVector,
    #[error("gallery is empty")]
    EmptyGallery,
    #[error("signature has no local vector for pair {0}")]
    MissingLocalVector(LabelPair),
    #[error("rank table needs at least 2 rows and 2 methods, got {rows} x {methods}")]
    DegenerateTable { rows: usize, methods: usize },
    #[error("Iman-Davenport denominator vanishes: N(k-1) = {capacity} <= chi2 = {chi2}")]
    SingularDenominator { capacity: f64, chi2: f64 },
}

impl LccError {
    /// True for failures caused by numerics rather than malformed input.
    pub fn is_numeric(&self) -> bool {
        match self {
            LccError::NonFiniteLoss { .. }
            | LccError::DegenerateMeans
            | LccError::ZeroVector
            | LccError::SingularDenominator { .. } => true,
            LccError::LocalModel { source, .. } => source.is_numeric(),
            _ => false,
        }
    }
}
