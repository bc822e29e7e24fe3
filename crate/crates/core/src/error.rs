use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension must be at least 1")]
    ZeroDimension,

    #[error("dimension {n} exceeds the supported maximum of {max}")]
    DimensionTooLarge { n: u32, max: u32 },

    #[error("dimension {n} exceeds the materialization limit of {limit}")]
    NotMaterializable { n: u32, limit: u32 },

    #[error("bit index {index} out of range for dimension {n}")]
    BitOutOfRange { index: u32, n: u32 },

    #[error("vertex {vertex} out of range for dimension {n}")]
    VertexOutOfRange { vertex: u64, n: u32 },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("claimed ({d1},{d2}) violates the divisibility condition on Q_{n}")]
    NecessaryCondition { d1: u32, d2: u32, n: u32 },

    #[error("materialized side has {actual} vertices, expected {expected}")]
    SizeMismatch { expected: u64, actual: u64 },

    #[error("doubling requires t > r (t = {t}, r = {r})")]
    DoublingPrecondition { t: u32, r: u32 },

    #[error("no decomposition of V2 into {dim}-dimensional subcubes exists for the doubling step on Q_{n}")]
    NoSubcubeCover { n: u32, dim: u32 },

    #[error("subcube cover search on Q_{n} gave up after {nodes} nodes")]
    CoverBudget { n: u32, nodes: u64 },

    #[error("neighbor-choice digest mismatch: plan records {expected}, execution produced {actual}")]
    DigestMismatch { expected: String, actual: String },

    #[error("malformed plan: {0}")]
    MalformedPlan(String),

    #[error("malformed vertex set file: {0}")]
    MalformedSet(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
