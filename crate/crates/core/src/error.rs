use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    /// The interference channel of UE `k` at AP `m` has full column rank, so
    /// no interference-free precoder exists (the scenario needs `Ntx >= K`).
    #[error("null space of the interference channel is empty (ap {m}, ue {k})")]
    NullspaceEmpty { m: usize, k: usize },

    #[error("invalid subproblem: {0}")]
    InvalidSubproblem(String),

    /// The central surrogate problem was infeasible at every iteration: the
    /// sensing threshold is out of reach under the power budgets.
    #[error("sensing threshold unreachable: central surrogate infeasible at every iteration")]
    GlobalInfeasible,

    #[error("invalid experiment: {0}")]
    InvalidExperiment(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    /// Short machine-readable identifier for the error class.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::InvalidConfig(_) => "invalid_config",
            Error::NullspaceEmpty { .. } => "nullspace_empty",
            Error::InvalidSubproblem(_) => "invalid_subproblem",
            Error::GlobalInfeasible => "global_infeasible",
            Error::InvalidExperiment(_) => "invalid_experiment",
            Error::Io(_) => "io",
            Error::Json(_) => "json",
        }
    }
}
