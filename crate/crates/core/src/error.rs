use thiserror::Error;

/// Errors produced by the synthesis, spectrum, estimation and selection routines.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid model: {0}")]
    InvalidModel(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("input field does not cover rows {rows:?} x cols {cols:?} required by the filter")]
    Coverage { rows: (i64, i64), cols: (i64, i64) },

    #[error("normal equations are numerically singular (reciprocal condition {rcond:e})")]
    Conditioning { rcond: f64 },

    #[error("rank deficient fit: {0}")]
    RankDeficient(String),

    #[error("config error: {0}")]
    Config(String),

    #[error("malformed grid file: {0}")]
    Format(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
