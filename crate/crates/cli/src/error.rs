use thiserror::Error;

pub type Result<T> = std::result::Result<T, CliError>;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("config error: {0}")]
    Config(String),

    #[error(transparent)]
    Core(#[from] z2metts_core::Error),

    #[error("i/o error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

impl CliError {
    pub fn config(msg: impl Into<String>) -> CliError {
        CliError::Config(msg.into())
    }

    pub fn io(path: impl AsRef<std::path::Path>, source: std::io::Error) -> CliError {
        CliError::Io {
            path: path.as_ref().display().to_string(),
            source,
        }
    }

    /// 2 for configuration problems, 3 for numerical non-convergence, 1 otherwise.
    pub fn exit_code(&self) -> i32 {
        use z2metts_core::Error as E;
        match self {
            CliError::Config(_) => 2,
            CliError::Core(e) if e.is_non_convergence() => 3,
            CliError::Core(E::Config(_) | E::InvalidParams(_) | E::InvalidBeta(_) | E::UnknownBasis(_)) => 2,
            _ => 1,
        }
    }
}
