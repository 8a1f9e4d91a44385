use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("shape mismatch in {context}: {detail}")]
    Shape { context: &'static str, detail: String },

    #[error("invalid {field}: {reason}")]
    Invalid { field: String, reason: String },

    #[error("non-finite state encountered at grid node {node}")]
    Divergence { node: usize },

    #[error("matrix is singular to working precision (pivot magnitude {pivot:e})")]
    Singular { pivot: f64 },

    #[error("X(t) is singular at grid node {node} (reciprocal condition {rcond:e})")]
    SingularAtNode { node: usize, rcond: f64 },

    #[error("grid mismatch: {0}")]
    GridMismatch(String),

    #[error("forward-backward sweep did not converge after {iterations} iterations (last update {last_update:e})")]
    NonConvergence { iterations: usize, last_update: f64 },

    #[error("convergence order undefined at entry {index}: errors must be positive")]
    UndefinedOrder { index: usize },

    #[error("level N={level}: {source}")]
    AtLevel {
        level: u32,
        #[source]
        source: Box<Error>,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn shape(context: &'static str, detail: impl Into<String>) -> Self {
        Error::Shape {
            context,
            detail: detail.into(),
        }
    }

    pub(crate) fn invalid(field: impl Into<String>, reason: impl Into<String>) -> Self {
        Error::Invalid {
            field: field.into(),
            reason: reason.into(),
        }
    }

    /// Prefixes the field path of an [`Error::Invalid`]; other variants pass through.
    pub fn within(self, prefix: &str) -> Self {
        match self {
            Error::Invalid { field, reason } => Error::Invalid {
                field: format!("{prefix}.{field}"),
                reason,
            },
            other => other,
        }
    }

    /// True for errors caused by bad user input rather than a solver failure.
    pub fn is_config_error(&self) -> bool {
        match self {
            Error::Invalid { .. } | Error::Shape { .. } | Error::Json(_) => true,
            Error::AtLevel { source, .. } => source.is_config_error(),
            _ => false,
        }
    }
}
