use thiserror::Error;

#[derive(Debug, Error)]
pub enum SimError {
    #[error(transparent)]
    Core(#[from] bldgres_core::CoreError),
    #[error("config: {0}")]
    Config(String),
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
    #[error("day {day}: {source}")]
    Day { day: usize, source: bldgres_core::CoreError },
}

pub type Result<T> = std::result::Result<T, SimError>;
