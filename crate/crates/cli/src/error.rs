use std::path::PathBuf;

use spikeforge_core::engine::PersistError;

use crate::config::Diagnostics;
use crate::io::DataError;

pub const EXIT_CONFIG: u8 = 1;
pub const EXIT_SIM: u8 = 2;
pub const EXIT_IO: u8 = 3;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{0}")]
    Config(#[from] Diagnostics),
    #[error("simulation failed: {0}")]
    Sim(String),
    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error(transparent)]
    Data(#[from] DataError),
    #[error("{}: {source}", path.display())]
    Weights { path: PathBuf, source: PersistError },
    #[error("{0}")]
    Usage(String),
    #[error("tuning candidate {params}: {source}")]
    Candidate {
        params: String,
        source: Box<CliError>,
    },
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            Self::Config(_) | Self::Usage(_) => EXIT_CONFIG,
            Self::Sim(_) => EXIT_SIM,
            Self::Io { .. } | Self::Data(_) | Self::Weights { .. } => EXIT_IO,
            Self::Candidate { source, .. } => source.exit_code(),
        }
    }

    pub(crate) fn sim(e: impl std::fmt::Display) -> Self {
        Self::Sim(e.to_string())
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Self::Io {
            path: path.into(),
            source,
        }
    }
}
