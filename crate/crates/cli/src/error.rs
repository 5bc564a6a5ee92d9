use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("config error: {0}")]
    Config(String),

    #[error(transparent)]
    Core(#[from] dirt_core::Error),

    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

impl CliError {
    pub fn io(path: &std::path::Path, source: std::io::Error) -> Self {
        CliError::Io {
            path: path.display().to_string(),
            source,
        }
    }

    /// 2 for anything the user can fix in their inputs, 3 for numerical failures.
    pub fn exit_code(&self) -> u8 {
        use dirt_core::Error as E;
        match self {
            CliError::Config(_) | CliError::Io { .. } => 2,
            CliError::Core(E::InvalidArgument(_) | E::Format(_) | E::Io(_) | E::DimensionCap { .. }) => 2,
            CliError::Core(_) => 3,
        }
    }
}
