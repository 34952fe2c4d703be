use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("config error: {0}")]
    Config(String),

    #[error(transparent)]
    Model(#[from] mixlab::Error),

    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),

    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),
}

impl CliError {
    /// 1 for model failures (a check that could not pass), 2 for usage, config and I/O.
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Model(_) => 1,
            _ => 2,
        }
    }
}
