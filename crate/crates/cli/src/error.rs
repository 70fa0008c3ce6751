use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error(transparent)]
    Core(#[from] silab_core::Error),
}

impl CliError {
    /// 2 for unusable configuration, 3 for I/O, 1 for failures while running.
    pub fn exit_code(&self) -> u8 {
        use silab_core::Error as E;
        match self {
            CliError::Config(_) => 2,
            CliError::Io { .. } => 3,
            CliError::Core(e) => match e {
                E::Io(_) => 3,
                E::Json(_)
                | E::DimensionMismatch(_)
                | E::InvalidMdp(_)
                | E::InvalidPolicy(_)
                | E::InvalidSpec(_)
                | E::InvalidHorizon(_)
                | E::InvalidTemperature(_)
                | E::ZeroEntropyWeight
                | E::InvalidConfig(_) => 2,
                _ => 1,
            },
        }
    }
}

impl From<csv::Error> for CliError {
    fn from(e: csv::Error) -> Self {
        let path = PathBuf::new();
        match e.into_kind() {
            csv::ErrorKind::Io(source) => CliError::Io { path, source },
            other => CliError::Io {
                path,
                source: std::io::Error::other(format!("{other:?}")),
            },
        }
    }
}
