//! Command-line layer: config files, run directories, manifests, benchmark
//! presets, plots and oracle dumps.

pub mod bench;
pub mod configfile;
pub mod dump;
pub mod manifest;
pub mod plot;
pub mod presets;
pub mod run;

use dcs_core::DcsError;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("config is missing required key `{0}`")]
    MissingKey(String),
    #[error("config error: {0}")]
    Config(String),
    #[error("unknown preset `{0}`")]
    UnknownPreset(String),
    #[error("malformed report {path}: {reason}")]
    MalformedReport { path: String, reason: String },
    #[error("manifest references missing file {0}")]
    MissingFile(String),
    #[error(transparent)]
    Core(#[from] DcsError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub type Result<T, E = CliError> = std::result::Result<T, E>;
