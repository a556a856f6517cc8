//! Command-line front end for the `gensmooth` toolkit: certify objectives,
//! run studies, verify invariant suites, and summarize outputs.

pub mod commands;
pub mod config;
pub mod output;
pub mod presets;
pub mod suites;

use gensmooth::experiments::ExperimentError;
use std::fmt::Display;

/// Outcome of a command that ran to completion.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Status {
    Success,
    /// An assertion, certification, or acceptance check failed.
    Failure,
}

/// Errors that stop a command before it completes.
#[derive(Debug, thiserror::Error)]
pub enum CliError {
    /// Malformed configuration or violated precondition.
    #[error("configuration error: {0}")]
    Config(String),
    /// A computation failed after validation.
    #[error("run failed: {0}")]
    Failure(String),
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
}

impl CliError {
    pub fn config(e: impl Display) -> Self {
        CliError::Config(e.to_string())
    }

    pub fn failure(e: impl Display) -> Self {
        CliError::Failure(e.to_string())
    }

    /// Parameter and regime errors are configuration errors; anything raised
    /// mid-simulation is a run failure.
    pub fn from_experiment(e: ExperimentError) -> Self {
        match e {
            ExperimentError::Run(_) | ExperimentError::Numerics(_) => CliError::failure(e),
            _ => CliError::config(e),
        }
    }
}

/// Process exit code: 0 success, 1 failure, 2 configuration error.
pub fn exit_code(result: &Result<Status, CliError>) -> i32 {
    match result {
        Ok(Status::Success) => 0,
        Ok(Status::Failure) | Err(CliError::Failure(_)) | Err(CliError::Io(_)) => 1,
        Err(CliError::Config(_)) => 2,
    }
}

/// The book's chapters, compiled so their listings run as doc-tests.
#[cfg(doctest)]
pub mod book {
    #[doc = include_str!("../../../book/src/introduction.md")]
    pub mod introduction {}
    #[doc = include_str!("../../../book/src/objectives.md")]
    pub mod objectives {}
    #[doc = include_str!("../../../book/src/oracle.md")]
    pub mod oracle {}
    #[doc = include_str!("../../../book/src/optimizers.md")]
    pub mod optimizers {}
    #[doc = include_str!("../../../book/src/stopping.md")]
    pub mod stopping {}
    #[doc = include_str!("../../../book/src/studies.md")]
    pub mod studies {}
    #[doc = include_str!("../../../book/src/cli.md")]
    pub mod cli {}
}
