//! Experiment runner: configs and presets, the end-to-end pipeline, phase
//! sweeps and the artifacts they write.

pub mod commands;
pub mod config;
pub mod diagnostic;
pub mod pipeline;
pub mod sweep;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("config: {0}")]
    Config(String),
    #[error(transparent)]
    Bdsr(#[from] bdsr::Error),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T, E = CliError> = std::result::Result<T, E>;

/// Exit codes: 0 optimal, 1 pipeline or input error, 2 solver did not reach optimality.
pub const EXIT_OK: u8 = 0;
pub const EXIT_ERROR: u8 = 1;
pub const EXIT_NOT_OPTIMAL: u8 = 2;
