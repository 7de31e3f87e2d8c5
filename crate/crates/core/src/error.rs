use thiserror::Error;

#[derive(Debug, Error)]
pub enum CoreError {
    #[error("dimension mismatch: {0}")]
    Dimension(String),
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("unknown archetype `{0}`")]
    UnknownArchetype(String),
    #[error("disturbance trace has {have} steps but {need} are required")]
    TraceTooShort { have: usize, need: usize },
    #[error("horizon mismatch: {0} vs {1}")]
    HorizonMismatch(usize, usize),
    #[error("row {row} of S mixes signs; use the general 1-norm form")]
    MixedSignRow { row: usize },
    #[error("problem is infeasible: {0}")]
    Infeasible(String),
    #[error("solver failed with status {0:?}")]
    Solver(bldgres_lp::LpStatus),
    #[error("vertex enumeration limited to dimension {max}, got {got}")]
    DimensionGuard { got: usize, max: usize },
    #[error(transparent)]
    Lp(#[from] bldgres_lp::LpError),
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
    #[error("config: {0}")]
    Config(String),
}

pub type Result<T> = std::result::Result<T, CoreError>;
