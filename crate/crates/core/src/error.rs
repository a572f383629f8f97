use thiserror::Error;

/// Errors produced by the concept-formation engine.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("malformed instance JSON: {0}")]
    Json(String),

    #[error("instance must be a JSON object")]
    NotAnObject,

    #[error("attribute `{name}`: {reason}")]
    InvalidAttribute { name: String, reason: String },

    #[error("numeric value for `{0}` is not finite")]
    NonFinite(String),

    #[error("relation `{relation}` references unknown component `{component}`")]
    UnknownComponent { relation: String, component: String },

    #[error("malformed relation `{0}`")]
    MalformedRelation(String),

    #[error("mapping is not injective: `{0}` is targeted twice")]
    MappingNotInjective(String),

    #[error("mapping does not cover component `{0}`")]
    MappingIncomplete(String),

    #[error("flat name `{0}` collides with an existing attribute")]
    NameCollision(String),

    #[error("flat name `{0}` is both a leaf value and a component path")]
    AmbiguousName(String),

    #[error("attribute `{0}` changes type between nominal and numeric")]
    TypeConflict(String),

    #[error("operation requires a non-empty concept")]
    EmptyConcept,

    #[error("category utility requires at least one child with positive count")]
    EmptyPartition,

    #[error("the concept tree is empty")]
    EmptyTree,

    #[error("attribute `{0}` is unknown to the concept tree")]
    UnknownAttribute(String),

    #[error("label length mismatch: {left} vs {right}")]
    LengthMismatch { left: usize, right: usize },

    #[error("at least two labels are required, got {0}")]
    TooFewLabels(usize),

    #[error("no outcome runs supplied")]
    NoRuns,

    #[error("outcome runs have unequal lengths")]
    RaggedRuns,

    #[error("empty dataset")]
    EmptyDataset,

    #[error("dataset has {available} instances but {requested} were requested")]
    DatasetTooSmall { available: usize, requested: usize },

    #[error("target `{0}` is missing from dataset instance {1}")]
    TargetMissing(String, usize),

    #[error("target `{0}` must be nominal")]
    NonNominalTarget(String),

    #[error("invalid synthetic spec: {0}")]
    InvalidSpec(String),

    #[error("invalid parameters: {0}")]
    InvalidParams(String),

    #[error("invalid snapshot: {0}")]
    InvalidSnapshot(String),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
