use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameters: {0}")]
    InvalidParams(String),
    /// Two sketches whose (seed, k, table size, lambda, ...) differ may not be
    /// combined; doing so would silently produce garbage, so it is a hard error.
    #[error("incompatible sketch configs: {0}")]
    ConfigMismatch(String),
    #[error("incompatible index modes: {0}")]
    ModeMismatch(String),
    #[error(
        "master seeds differ ({a:#018x} vs {b:#018x}); rebuild both datasets with a shared seed"
    )]
    SeedMismatch { a: u64, b: u64 },
    #[error("query shape does not fit the structure: {0}")]
    GeometryMismatch(String),
    #[error("duplicate universe id {id} within one dataset")]
    DuplicateId { id: u64 },
    #[error("universe id {id} does not fit in 48 bits")]
    IdTooWide { id: u64 },
    #[error("grid indices out of bounds: {0}")]
    GridBounds(String),
    #[error("unknown canonical set id {0}")]
    UnknownSet(usize),
    #[error("malformed data: {0}")]
    Data(String),
    #[error("corrupt container: {0}")]
    Corrupt(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
