use thiserror::Error;

/// Errors raised across the hosting-capacity toolkit.
#[derive(Debug, Error)]
pub enum Error {
    #[error("network is not radial: {0}")]
    NotRadial(String),

    #[error("power flow diverged: {0}")]
    Diverged(String),

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("invalid configuration: {0}")]
    ConfigInvalid(String),

    #[error("invalid input file: {0}")]
    InvalidInput(String),

    #[error("pool is empty")]
    EmptyPool,

    #[error("no feasible scenario in labeled set")]
    NoFeasibleScenario,

    #[error("degenerate data: {0}")]
    DegenerateData(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    /// Process exit status used by the command-line front end: 2 for bad
    /// input or configuration, 3 for power-flow divergence, 4 when no
    /// scenario is feasible.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Diverged(_) => 3,
            Error::NoFeasibleScenario => 4,
            _ => 2,
        }
    }
}
