use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid window: {0}")]
    InvalidWindow(String),

    #[error("point ({x}, {y}) lies outside the observation window")]
    PointOutsideWindow { x: f64, y: f64 },

    #[error("invalid pixel grid: {0}")]
    InvalidGrid(String),

    #[error("pattern window does not match the grid window")]
    WindowMismatch,

    #[error("invalid model: {0}")]
    InvalidModel(String),

    #[error("unknown model family `{0}`")]
    UnknownFamily(String),

    #[error("invalid basis term `{0}`")]
    InvalidTerm(String),

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error(
        "{bins} bins do not divide the rank scale {scale}; choose a bin count that divides K+1"
    )]
    BinMisalignment { bins: usize, scale: u64 },

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),

    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
