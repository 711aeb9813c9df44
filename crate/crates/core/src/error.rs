use std::path::PathBuf;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("malformed header: expected `{expected}`, got `{got}`")]
    Header { expected: String, got: String },

    #[error("row {row}: {msg}")]
    Row { row: usize, msg: String },

    #[error("row {row}: duplicate key `{key}`")]
    DuplicateKey { row: usize, key: String },

    #[error("year {year}: no usable countries")]
    NoUsableCountries { year: i32 },

    #[error("year {year}: degenerate snapshot (total trade is zero)")]
    DegenerateSnapshot { year: i32 },

    #[error("country `{country}` has nonpositive gdp; field parameter undefined")]
    NonpositiveGdp { country: String },

    #[error("self-pair ({node},{node}) carries no trade link")]
    SelfPair { node: usize },

    #[error("dimension mismatch: expected {expected} nodes, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("invalid chain config: {0}")]
    InvalidChainConfig(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("empty input: {0}")]
    EmptyInput(String),

    #[error("missing file: {0}")]
    MissingFile(PathBuf),

    #[error("config error: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    /// Process exit code for the CLI: 1 for usage/config problems, 2 for data
    /// problems encountered while running.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Config(_) | Error::InvalidArgument(_) | Error::InvalidChainConfig(_) => 1,
            _ => 2,
        }
    }
}
