use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("spec document: {0}")]
    SpecSyntax(String),
    #[error("duplicate indicator name `{0}`")]
    DuplicateIndicator(String),
    #[error("indicator `{name}`: {reason}")]
    InvalidCategories { name: String, reason: String },
    #[error("indicator `{name}`: trivial cutoff {cutoff} (needs at least one achievement below and one at or above it)")]
    TrivialCutoff { name: String, cutoff: String },
    #[error("indicator `{name}`: weight must be positive and finite, got {weight}")]
    NonPositiveWeight { name: String, weight: f64 },
    #[error("no indicators declared")]
    NoIndicators,
    #[error("missing column `{0}`")]
    MissingColumn(String),
    #[error("row {row}, column `{column}`: unknown category `{value}`")]
    UnknownCategory { row: usize, column: String, value: String },
    #[error("row {row}, column `{column}`: `{value}` is not a number")]
    NotNumeric { row: usize, column: String, value: String },
    #[error("row {row}, column `{column}`: missing value")]
    MissingValue { row: usize, column: String },
    #[error("row {row}: survey weight must be positive and finite, got {weight}")]
    InvalidSurveyWeight { row: usize, weight: f64 },
    #[error("dataset: {0}")]
    InvalidDataset(String),
    #[error("indicator `{0}` has no observations")]
    EmptyColumn(String),
    #[error("total survey weight must be positive")]
    NonPositiveTotalWeight,
    #[error("unknown indicator index {0}")]
    UnknownIndicator(usize),
    #[error("reference document: {0}")]
    ReferenceDocument(String),
    #[error("reference does not match indicators: {0}")]
    ReferenceMismatch(String),
    #[error("poverty cutoff k must lie in (0, 1], got {0}")]
    InvalidPovertyCutoff(f64),
    #[error("alpha must be >= 1, got {0}")]
    InvalidAlpha(f64),
    #[error("normalized gaps need cardinal indicators; `{0}` is ordinal")]
    OrdinalIndicator(String),
    #[error("indicator `{0}`: normalized gap needs a positive cutoff")]
    NonPositiveCutoff(String),
    #[error("subgroup labels are required")]
    MissingSubgroups,
    #[error("subgroup `{0}` is empty")]
    EmptySubgroup(String),
    #[error("per-subgroup in-sample references break the decomposition identity; pass allow_inconsistent to proceed")]
    InconsistentReferences,
    #[error("adjusted index is zero; contributions are undefined")]
    ZeroIndex,
    #[error("need at least {needed} poor persons, found {found}")]
    TooFewPoor { needed: usize, found: usize },
    #[error("{0} has zero variance among the poor")]
    ZeroVariance(&'static str),
    #[error("length mismatch: {0}")]
    LengthMismatch(String),
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
}

pub type Result<T> = std::result::Result<T, Error>;
