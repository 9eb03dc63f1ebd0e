use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("taxonomy error: {0}")]
    Taxonomy(String),

    #[error("config error: {0}")]
    Config(String),

    #[error("agent error: {0}")]
    Agent(String),

    #[error("data error: {0}")]
    Data(String),

    #[error("undefined metric: {0}")]
    UndefinedMetric(String),

    #[error("scope error: {0}")]
    Scope(String),

    #[error("rule-set error: {0}")]
    RuleSet(String),

    #[error("transport error: {0}")]
    Transport(String),

    #[error("auth error: {0}")]
    Auth(String),

    #[error("bank missing at {0}")]
    BankMissing(PathBuf),

    #[error("failure budget exceeded: {failed} transport errors out of {total} presentations")]
    BudgetExceeded { failed: usize, total: usize },

    #[error("missing data ({} item(s))", missing.len())]
    Incomplete { missing: Vec<String> },

    #[error("holdout violation: {0}")]
    HoldoutViolation(String),

    #[error("format version mismatch in {path}: found {found}, expected {expected}")]
    FormatVersion {
        path: PathBuf,
        found: u32,
        expected: u32,
    },

    #[error("refused: {0}")]
    Refused(String),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{context}: {source}")]
    Json {
        context: String,
        #[source]
        source: serde_json::Error,
    },

    #[error("{path}: {message}")]
    Toml { path: PathBuf, message: String },
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn json(context: impl Into<String>, source: serde_json::Error) -> Self {
        Error::Json {
            context: context.into(),
            source,
        }
    }
}
