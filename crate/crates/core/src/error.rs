use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("kernel violates assumption (A1): {0}")]
    Kernel(String),

    #[error("invalid grid geometry: {0}")]
    Grid(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("norm order unsupported: {0}")]
    NormOrder(String),

    #[error("missing norm in report at t = {t}: {what}")]
    MissingNorm { t: f64, what: String },

    #[error("symbol evaluated outside its domain: {0}")]
    SymbolDomain(String),

    #[error("configuration error: {0}")]
    Config(String),

    #[error("non-finite values after step at t = {t}")]
    NonFinite { t: f64 },

    #[error("study member with eps = {eps} blew up at t = {t}")]
    StudyBlowUp { eps: f64, t: f64 },

    #[error("format error: {0}")]
    Format(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}
