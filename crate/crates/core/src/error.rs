use thiserror::Error;

pub type Result<T> = std::result::Result<T, JlcmError>;

#[derive(Debug, Error)]
pub enum JlcmError {
    /// Covariate rows or coefficient vectors of incompatible length.
    #[error("design error: {0}")]
    Design(String),

    /// Argument outside the domain of the function (t <= 0, tau <= 0, u not in (0,1), ...).
    #[error("domain error: {0}")]
    Domain(String),

    /// Dataset invariant violated.
    #[error("invalid dataset: {0}")]
    Data(String),

    /// Inconsistent or incomplete parameter / chain state.
    #[error("state error: {0}")]
    State(String),

    /// Linear algebra failure (non-invertible precision, non-PD scale, ...).
    #[error("numeric error: {0}")]
    Numeric(String),

    /// Non-finite log-target while running a chain.
    #[error("chain diverged at iteration {iteration}: {reason}")]
    Divergence { iteration: usize, reason: String },

    #[error("undefined AUC: {cases} weighted cases, {controls} weighted controls")]
    UndefinedAuc { cases: usize, controls: usize },

    #[error("undefined censoring weight: censoring survival is zero at t = {0}")]
    UndefinedWeight(f64),

    #[error("schema error: column `{0}` not found")]
    MissingColumn(String),

    #[error("parse error at line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("config error: {0}")]
    Config(String),

    #[error("incompatible chain file version: found {found}, expected {expected}")]
    Version { found: String, expected: String },

    #[error("I/O error: {0}")]
    Io(#[from] std::io::Error),

    #[error("CSV error: {0}")]
    Csv(#[from] csv::Error),
}

impl JlcmError {
    /// Short machine-readable kind, used by the CLI error line and the C ABI.
    pub fn kind(&self) -> &'static str {
        match self {
            JlcmError::Design(_) => "design",
            JlcmError::Domain(_) => "domain",
            JlcmError::Data(_) => "data",
            JlcmError::State(_) => "state",
            JlcmError::Numeric(_) => "numeric",
            JlcmError::Divergence { .. } => "divergence",
            JlcmError::UndefinedAuc { .. } => "undefined_auc",
            JlcmError::UndefinedWeight(_) => "undefined_weight",
            JlcmError::MissingColumn(_) => "schema",
            JlcmError::Parse { .. } => "parse",
            JlcmError::Config(_) => "config",
            JlcmError::Version { .. } => "version",
            JlcmError::Io(_) => "io",
            JlcmError::Csv(_) => "csv",
        }
    }
}
