//! Stable on-disk formats: timestamp streams, histograms, configuration
//! files and run manifests.

mod config;
mod histogram;
mod manifest;
mod timestamps;

use std::path::Path;

use sha2::{Digest, Sha256};
use thiserror::Error;

pub use config::{
    ChannelsSection, ConfigFile, DriveSection, EmitterSection, HbtSection, ModeFractionSpec, SaturationSection,
    ScanSection, TcspcSection, SCHEMA_VERSION,
};
pub use histogram::{read_histogram_csv, write_histogram_csv};
pub use manifest::{manifest_path, RunManifest};
pub use timestamps::{
    read_timestamps, read_timestamps_binary, read_timestamps_csv, write_timestamps_binary, write_timestamps_csv,
    TimestampFormat, BINARY_MAGIC, BINARY_VERSION,
};

#[derive(Debug, Error)]
pub enum IoError {
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error("not a timestamp file: bad magic")]
    BadMagic,
    #[error("unsupported format version {0}")]
    UnsupportedVersion(u16),
    #[error("truncated record {0}")]
    Truncated(usize),
    #[error("record {0} is earlier than its predecessor; timestamps must be sorted")]
    Unsorted(usize),
    #[error("header declares {declared} channels but {found} occur")]
    ChannelCount { declared: u16, found: usize },
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("config: {0}")]
    Config(String),
}

impl IoError {
    pub(crate) fn parse(line: usize, message: impl Into<String>) -> Self {
        IoError::Parse {
            line,
            message: message.into(),
        }
    }
}

/// Lower-case hex SHA-256 of a byte string.
pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

pub fn sha256_file(path: &Path) -> Result<String, IoError> {
    Ok(sha256_hex(&std::fs::read(path)?))
}
