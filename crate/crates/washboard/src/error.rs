use std::path::{Path, PathBuf};

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("config: {0}")]
    Config(String),

    #[error("config: {0}")]
    Toml(#[from] toml::de::Error),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{}csv: {source}", .path.as_ref().map(|p| format!("{}: ", p.display())).unwrap_or_default())]
    Csv {
        path: Option<PathBuf>,
        #[source]
        source: csv::Error,
    },

    #[error(transparent)]
    Numerical(#[from] washboard_core::Error),
}

impl Error {
    pub fn io(path: &Path, source: std::io::Error) -> Self {
        Error::Io {
            path: path.to_owned(),
            source,
        }
    }

    /// Attaches `path` to CSV errors raised while reading or writing it.
    pub fn at(self, path: &Path) -> Self {
        match self {
            Error::Csv { path: None, source } => Error::Csv {
                path: Some(path.to_owned()),
                source,
            },
            other => other,
        }
    }

    /// Process exit status: 1 for configuration and IO problems, 2 for numerical failures.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Numerical(_) => 2,
            _ => 1,
        }
    }
}

impl From<csv::Error> for Error {
    fn from(source: csv::Error) -> Self {
        Error::Csv { path: None, source }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
