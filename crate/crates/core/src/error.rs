use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    /// An input violated a documented constraint. `field` names the input,
    /// `constraint` states what was required.
    #[error("invalid {field}: {constraint}")]
    Domain { field: String, constraint: String },

    #[error("numerical non-convergence in {context}: {detail}")]
    NonConvergence { context: String, detail: String },

    #[error("bracket [{lo}, {hi}] does not contain a sign change (g(lo)={g_lo}, g(hi)={g_hi})")]
    BadBracket { lo: f64, hi: f64, g_lo: f64, g_hi: f64 },

    #[error("no base station inside the simulation window")]
    EmptyWindow,

    #[error("{0}")]
    Usage(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn domain(field: impl Into<String>, constraint: impl Into<String>) -> Self {
        Error::Domain {
            field: field.into(),
            constraint: constraint.into(),
        }
    }

    pub(crate) fn non_convergence(context: impl Into<String>, detail: impl Into<String>) -> Self {
        Error::NonConvergence {
            context: context.into(),
            detail: detail.into(),
        }
    }
}
