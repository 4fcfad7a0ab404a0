use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error("dimension mismatch in {context}: expected {expected}, got {got}")]
    DimensionMismatch {
        context: &'static str,
        expected: usize,
        got: usize,
    },
    #[error("cell {cell} outside a grid of {n} cells")]
    OutOfBounds { cell: usize, n: usize },
    #[error("no candidate actions")]
    EmptyActions,
    #[error("search budget {budget} is below the number of root actions {actions}")]
    BudgetTooSmall { budget: usize, actions: usize },
    #[error("non-finite value in {0}")]
    NonFinite(String),
    #[error("malformed {what}: {detail}")]
    Format { what: &'static str, detail: String },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub(crate) fn format(what: &'static str, detail: impl Into<String>) -> Self {
        Error::Format {
            what,
            detail: detail.into(),
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
