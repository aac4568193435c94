use std::path::PathBuf;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("cannot access {}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{}: schema violation at `{at}`: {message}", file.display())]
    Schema { file: PathBuf, at: String, message: String },

    #[error("{}: unsupported interchange version `{version}`", file.display())]
    Version { file: PathBuf, version: String },

    #[error("{}: {message}", file.display())]
    Csv { file: PathBuf, message: String },

    #[error("unknown run `{0}`")]
    UnknownRun(String),

    #[error("unknown candidate `{0}`")]
    UnknownCandidate(String),

    #[error("bad request: {0}")]
    BadRequest(String),

    #[error(transparent)]
    Core(#[from] runlens_core::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
