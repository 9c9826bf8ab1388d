use std::path::PathBuf;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("size mismatch: expected {expected}, got {actual}")]
    SizeMismatch { expected: usize, actual: usize },

    #[error("index {index} out of range for {len} spins")]
    IndexOutOfRange { index: usize, len: usize },

    #[error("invalid model: {0}")]
    InvalidModel(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("{path}:{line}: {message}")]
    Parse {
        path: String,
        line: usize,
        message: String,
    },

    #[error("state is not a local minimum: {0}")]
    NotAMinimum(String),

    #[error("non-finite parameter after epoch {epoch}, batch {batch}: {what}")]
    NonFinite {
        epoch: usize,
        batch: usize,
        what: String,
    },

    #[error("landscape too large: n = {n} needs 2^{n} states (limit n <= {limit})")]
    TooLarge { n: usize, limit: usize },

    #[error("checkpoint rejected: {0}")]
    Checkpoint(String),

    #[error("unknown sampler: {0}")]
    UnknownSampler(String),

    #[error("config error: {0}")]
    Config(String),

    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub(crate) fn parse(path: impl Into<String>, line: usize, message: impl Into<String>) -> Self {
        Error::Parse {
            path: path.into(),
            line,
            message: message.into(),
        }
    }

    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
