use thiserror::Error;

#[derive(Debug, Clone, Error, PartialEq)]
pub enum Error {
    #[error("degenerate parameters: {0}")]
    Degenerate(String),
    #[error("pole at {root} while evaluating {what}")]
    Pole { root: String, what: String },
    #[error("invalid signature: {0}")]
    InvalidSignature(String),
    #[error("ordering violated: {0}")]
    Ordering(String),
    #[error("incompatible specializations: {0}")]
    Incompatible(String),
    #[error("genericity violated: {0}")]
    Genericity(String),
    #[error("window: {0}")]
    Window(String),
    #[error("parse error: {0}")]
    Parse(String),
    #[error("{0}")]
    Other(String),
}

pub type Result<T> = std::result::Result<T, Error>;
