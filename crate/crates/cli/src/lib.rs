//! Experiment harness: configuration, the seven experiment commands and
//! their CSV and gnuplot outputs.

pub mod config;
pub mod experiments;
pub mod output;
pub mod plot;

use std::fmt;
use std::str::FromStr;

pub use config::ExperimentConfig;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("configuration: {0}")]
    Config(String),
    #[error(transparent)]
    Core(#[from] geim_core::Error),
    #[error("output: {0}")]
    Io(#[from] std::io::Error),
}

impl CliError {
    /// Stable tag for the error record.
    pub fn kind(&self) -> &'static str {
        match self {
            CliError::Config(_) => "Config",
            CliError::Core(e) => e.kind(),
            CliError::Io(_) => "Io",
        }
    }

    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 2,
            _ => 1,
        }
    }

    /// One-line JSON error record.
    pub fn record(&self, command: Option<Command>) -> String {
        serde_json::json!({
            "status": "error",
            "command": command.map(|c| c.name()),
            "kind": self.kind(),
            "message": self.to_string(),
        })
        .to_string()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Command {
    Snapshots,
    Decay,
    Svd,
    Bestfit,
    Lebesgue,
    Coupled,
    Noise,
}

impl Command {
    pub const ALL: [Command; 7] = [
        Command::Snapshots,
        Command::Decay,
        Command::Svd,
        Command::Bestfit,
        Command::Lebesgue,
        Command::Coupled,
        Command::Noise,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            Command::Snapshots => "snapshots",
            Command::Decay => "decay",
            Command::Svd => "svd",
            Command::Bestfit => "bestfit",
            Command::Lebesgue => "lebesgue",
            Command::Coupled => "coupled",
            Command::Noise => "noise",
        }
    }
}

impl fmt::Display for Command {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Command {
    type Err = CliError;

    fn from_str(s: &str) -> Result<Self, CliError> {
        Command::ALL
            .into_iter()
            .find(|c| c.name() == s)
            .ok_or_else(|| CliError::Config(format!("unknown command `{s}`")))
    }
}
