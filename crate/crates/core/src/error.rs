use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("normal matrix is numerically singular (condition estimate {condition:.3e})")]
    SingularSystem { condition: f64 },

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("no path between node {from} and node {to}")]
    NoPath { from: usize, to: usize },

    #[error("training requires labels: {0}")]
    MissingLabels(String),

    #[error("{path}:{line}: {message}")]
    Parse {
        path: PathBuf,
        line: usize,
        message: String,
    },

    #[error("inconsistent dimensions: {0}")]
    InconsistentDimensions(String),

    #[error("node {0} has no retained features and no neighbours to explain")]
    EmptyPlayerSet(usize),

    #[error("sample budget {budget} is too small, need at least {required}")]
    BudgetTooSmall { budget: usize, required: usize },

    #[error("{players} players exceed the enumeration limit of {limit}")]
    TooManyPlayers { players: usize, limit: usize },

    #[error("{samples} samples cannot identify {parameters} parameters")]
    InsufficientSamples { samples: usize, parameters: usize },

    #[error("target node {0} does not belong to any ground-truth motif")]
    TargetNotInMotif(usize),

    #[error("unknown {kind} `{name}`")]
    UnknownName { kind: &'static str, name: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    /// True for errors caused by bad user input rather than by the domain
    /// computation itself.
    pub fn is_input_error(&self) -> bool {
        matches!(
            self,
            Error::Parse { .. }
                | Error::InconsistentDimensions(_)
                | Error::InvalidArgument(_)
                | Error::UnknownName { .. }
                | Error::Io(_)
                | Error::Json(_)
                | Error::MissingLabels(_)
                | Error::DimensionMismatch(_)
        )
    }
}
