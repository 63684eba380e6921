use thiserror::Error;

#[derive(Debug, Error)]
pub enum DataError {
    #[error("invalid argument: {0}")]
    Argument(String),
    #[error("invalid partition: {0}")]
    Partition(String),
    #[error("parse error at row {row}, column {column}: {message}")]
    Parse { row: usize, column: String, message: String },
    #[error("layout error: {0}")]
    Layout(String),
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
    #[error("metadata error: {0}")]
    Meta(String),
}

pub type Result<T> = std::result::Result<T, DataError>;
