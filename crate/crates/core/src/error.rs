use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid grid: {0}")]
    Grid(String),
    #[error("invalid value for `{name}`: {reason}")]
    Param { name: String, reason: String },
    #[error("field has {got} values but the grid has {expected} cells")]
    SizeMismatch { expected: usize, got: usize },
    #[error("negative {field} value {value:e} at cell {cell}")]
    Negative {
        field: &'static str,
        cell: usize,
        value: f64,
    },
    #[error("non-finite {field} value at cell {cell}")]
    NonFinite { field: &'static str, cell: usize },
    #[error("linear solve stalled after {iterations} iterations (relative residual {residual:e})")]
    NoConvergence { iterations: usize, residual: f64 },
    #[error("unknown manufactured-solution case `{0}`")]
    UnknownCase(String),
}

impl Error {
    pub(crate) fn param(name: &str, reason: impl Into<String>) -> Self {
        Error::Param {
            name: name.to_string(),
            reason: reason.into(),
        }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
