use thiserror::Error;

pub const EXIT_OK: i32 = 0;
pub const EXIT_IO: i32 = 1;
pub const EXIT_USAGE: i32 = 2;
pub const EXIT_DATA: i32 = 3;
pub const EXIT_DIVERGED: i32 = 4;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error("{0}")]
    Data(String),
    #[error(transparent)]
    Lib(#[from] whonet::Error),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        use whonet::Error as E;
        match self {
            CliError::Usage(_) => EXIT_USAGE,
            CliError::Data(_) => EXIT_DATA,
            CliError::Io(_) => EXIT_IO,
            CliError::Json(_) => EXIT_IO,
            CliError::Lib(e) => match e {
                E::Divergence { .. } | E::Convergence { .. } => EXIT_DIVERGED,
                E::Config(_) | E::Toml(_) => EXIT_USAGE,
                E::Io(_) => EXIT_IO,
                _ => EXIT_DATA,
            },
        }
    }
}
