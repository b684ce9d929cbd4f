use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    /// Unreadable or invalid configuration; exit code 1.
    #[error("config error: {0}")]
    Config(String),
    /// Failure while running; exit code 2.
    #[error("runtime error: {0}")]
    Runtime(String),
    /// A verified property did not hold; exit code 3.
    #[error("property violated: {0}")]
    Property(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 1,
            CliError::Runtime(_) => 2,
            CliError::Property(_) => 3,
        }
    }
}

impl From<eppo_core::Error> for CliError {
    fn from(e: eppo_core::Error) -> Self {
        match e {
            eppo_core::Error::Config(m) => CliError::Config(m),
            other => CliError::Runtime(other.to_string()),
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Runtime(e.to_string())
    }
}

impl From<csv::Error> for CliError {
    fn from(e: csv::Error) -> Self {
        CliError::Runtime(e.to_string())
    }
}

pub type CliResult<T> = std::result::Result<T, CliError>;
