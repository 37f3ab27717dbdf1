use thiserror::Error;

/// Errors raised by the construction and analysis routines.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid grid: {0}")]
    InvalidGrid(String),
    #[error("unknown node `{0}`")]
    UnknownNode(String),
    #[error("coordinate ({x},{y}) is not a {expected} coordinate")]
    WrongParity { x: i64, y: i64, expected: &'static str },
    #[error("malformed topology document: {0}")]
    MalformedTopology(String),
    #[error("malformed placement: {0}")]
    MalformedPlacement(String),
    #[error("operation requires a grid topology")]
    NotAGrid,
    #[error("operation requires {0} placement")]
    WrongPlacement(&'static str),
    #[error("cache size {0} outside [1/4, 1]")]
    CacheSizeOutOfRange(String),
    #[error("symbol extension count must be at least 1")]
    ZeroExtensions,
    #[error("extension index {index} out of range for {count} extensions")]
    ExtensionOutOfRange { index: usize, count: usize },
    #[error("expected exactly two cooperating BSs, found {0}")]
    CooperationSize(usize),
    #[error("phase {0} outside 1..=4")]
    InvalidPhase(u8),
    #[error("IA order n must be at least 1")]
    ZeroOrder,
    #[error("empty generator set")]
    EmptyGenerators,
    #[error("generator truncation drops nonzero interference channel {0}")]
    TruncatedInterference(String),
    #[error("dimension budget exceeded: {what} = {value} > {budget}; reduce n or the generator count")]
    DimensionBudget { what: &'static str, value: String, budget: u64 },
    #[error("matrix has non-finite entries")]
    NonFinite,
    #[error("network matrix is rank deficient: rank {rank} < {expected}")]
    RankDeficient { rank: usize, expected: usize },
    #[error("linear program is {0}")]
    Lp(&'static str),
    #[error("{0}")]
    Invalid(String),
}

pub type Result<T> = std::result::Result<T, Error>;
