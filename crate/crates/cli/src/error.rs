use std::io;

use thiserror::Error;
use tslab_core::datagen::DataError;
use tslab_core::io::FormatError;
use tslab_core::numerics::SvdError;
use tslab_core::trainer::TrainError;

use crate::config::ConfigError;

#[derive(Debug, Error)]
pub enum CliError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error("data generation: {0}")]
    Data(#[from] DataError),
    #[error("training: {0}")]
    Train(#[from] TrainError),
    #[error(transparent)]
    Svd(#[from] SvdError),
    #[error("{path}: {source}")]
    Format { path: String, source: FormatError },
    #[error("{path}: {source}")]
    Io { path: String, source: io::Error },
    #[error("unknown column `{0}`")]
    UnknownColumn(String),
    #[error("snapshot has d={found}, config has d={expected}")]
    DimensionMismatch { expected: usize, found: usize },
}

impl CliError {
    pub fn io(path: impl AsRef<std::path::Path>, source: io::Error) -> Self {
        CliError::Io {
            path: path.as_ref().display().to_string(),
            source,
        }
    }

    pub fn format(path: impl AsRef<std::path::Path>, source: FormatError) -> Self {
        CliError::Format {
            path: path.as_ref().display().to_string(),
            source,
        }
    }
}
