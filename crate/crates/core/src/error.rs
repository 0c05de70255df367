use std::io;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, TctnError>;

#[derive(Debug, Error)]
pub enum TctnError {
    #[error("shape error: {0}")]
    Shape(String),

    #[error("configuration error: {0}")]
    Config(String),

    #[error("argument error: {0}")]
    Argument(String),

    #[error("non-finite value produced by {op}{}", location.as_ref().map(|l| format!(" in {l}")).unwrap_or_default())]
    Numeric {
        op: &'static str,
        location: Option<String>,
    },

    #[error("format error: {0}")]
    Format(String),

    #[error("length error: expected {expected} bytes, found {found}")]
    Length { expected: usize, found: usize },

    #[error("data error: {0}")]
    Data(String),

    #[error("invalid state: {0}")]
    InvalidState(String),

    #[error("invalid oracle: {0}")]
    InvalidOracle(String),

    #[error("i/o error: {0}")]
    Io(#[from] io::Error),
}

impl TctnError {
    pub(crate) fn shape(msg: impl Into<String>) -> Self {
        TctnError::Shape(msg.into())
    }

    pub(crate) fn config(msg: impl Into<String>) -> Self {
        TctnError::Config(msg.into())
    }

    pub(crate) fn argument(msg: impl Into<String>) -> Self {
        TctnError::Argument(msg.into())
    }

    /// Attaches the sublayer name to a numeric error. Other variants pass through.
    pub fn in_sublayer(self, name: impl Into<String>) -> Self {
        match self {
            TctnError::Numeric { op, location: None } => TctnError::Numeric {
                op,
                location: Some(name.into()),
            },
            other => other,
        }
    }
}
