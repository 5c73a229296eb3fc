use std::path::{Path, PathBuf};

/// Failures of the IO layer and the command line.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("configuration error: {0}")]
    Config(String),
    #[error("missing input {}: {reason}", path.display())]
    MissingInput { path: PathBuf, reason: String },
    #[error("{}: {message}", path.display())]
    Format { path: PathBuf, message: String },
    #[error("{}: {source}", path.display())]
    Io { path: PathBuf, source: std::io::Error },
    #[error(transparent)]
    Core(#[from] srcloc_core::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

/// Process exit status classes.
pub mod exit {
    pub const OK: i32 = 0;
    pub const FAILURE: i32 = 1;
    pub const CONFIG: i32 = 2;
    pub const MISSING_INPUT: i32 = 3;
    pub const NUMERIC: i32 = 4;
}

impl Error {
    pub fn format(path: &Path, message: impl Into<String>) -> Self {
        Error::Format {
            path: path.to_path_buf(),
            message: message.into(),
        }
    }

    pub fn missing(path: &Path, reason: impl Into<String>) -> Self {
        Error::MissingInput {
            path: path.to_path_buf(),
            reason: reason.into(),
        }
    }

    /// Wraps an IO error, classifying "not found" as a missing input.
    pub fn io(path: &Path, source: std::io::Error) -> Self {
        if source.kind() == std::io::ErrorKind::NotFound {
            Error::missing(path, "no such file")
        } else {
            Error::Io {
                path: path.to_path_buf(),
                source,
            }
        }
    }

    pub fn exit_code(&self) -> i32 {
        use srcloc_core::Error as C;
        match self {
            Error::Config(_) => exit::CONFIG,
            Error::MissingInput { .. } => exit::MISSING_INPUT,
            Error::Format { .. } | Error::Io { .. } => exit::FAILURE,
            Error::Core(e) => match e {
                C::Diverged { .. } | C::NonFinite(_) | C::ZeroEnergy(_) => exit::NUMERIC,
                C::InvalidConfig(_)
                | C::InvalidNetwork(_)
                | C::InvalidNoiseSpec(_)
                | C::InvalidGeometry(_)
                | C::InvalidBox(_)
                | C::Leak(_)
                | C::FingerprintMismatch { .. }
                | C::MicIndexOutOfRange { .. } => exit::CONFIG,
                C::CorpusTooSmall(_) | C::EmptyBatch | C::EmptyReport => exit::MISSING_INPUT,
                _ => exit::FAILURE,
            },
        }
    }
}
