//! Wire protocol, daemons, scenario runner and reports around `gputel-core`.

pub mod challenger;
pub mod config;
pub mod report;
pub mod scenario;
pub mod session;
pub mod wire;
pub mod worker;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("config: {0}")]
    Config(String),
    #[error(transparent)]
    Core(#[from] gputel_core::Error),
    #[error(transparent)]
    Wire(#[from] wire::WireError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
}

impl CliError {
    /// Every failure maps to exit status 2.
    pub fn exit_code(&self) -> i32 {
        2
    }
}
