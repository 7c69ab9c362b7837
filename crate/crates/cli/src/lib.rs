//! Command-line driver for `zerocert-core`: `certify`, `search`, `solve` and
//! `selftest`, configured by a TOML file.

pub mod commands;
pub mod config;
pub mod report;
pub mod selftest;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("config error: {0}")]
    Config(String),
    #[error("runtime error: {0}")]
    Runtime(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            Self::Config(_) => 2,
            Self::Runtime(_) => 3,
        }
    }
}

impl From<zerocert_core::Error> for CliError {
    fn from(e: zerocert_core::Error) -> Self {
        Self::Runtime(e.to_string())
    }
}
