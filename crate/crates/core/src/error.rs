use thiserror::Error;

/// Errors raised by model construction, belief arithmetic, solvers and I/O.
#[derive(Debug, Error)]
pub enum Error {
    /// A caller violated an operation's precondition (bad index, malformed belief, ...).
    #[error("contract violation: {0}")]
    Contract(String),

    #[error("invalid model: {0}")]
    InvalidModel(String),

    /// The observation has (numerically) zero probability under the given belief and action.
    #[error("observation has zero likelihood ({likelihood:e}) for this belief and action")]
    ZeroLikelihoodObservation { likelihood: f64 },

    #[error("alpha-vector set is empty")]
    EmptyAlphaSet,

    #[error("exact oracle exceeded its budget ({vectors} candidate vectors)")]
    OracleTooLarge { vectors: usize },

    #[error("observation action {0} is the trivial action; a nontrivial action is required")]
    TrivialActionSelected(usize),

    #[error("control settings are incompatible: {0}")]
    IncompatibleSettings(String),

    #[error("model spec invariant violated: {0}")]
    SpecInvariantViolation(String),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("{}", match .line { Some(l) => format!("parse error at line {l}: {message}"), None => format!("parse error: {message}") })]
    Parse { line: Option<usize>, message: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn contract(msg: impl Into<String>) -> Error {
    Error::Contract(msg.into())
}
