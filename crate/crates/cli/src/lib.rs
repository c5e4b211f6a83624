//! Experiment driver behind the `dotshape` binary: configuration and
//! presets, artifact output, and quick verification checks.

pub mod config;
pub mod experiment;
pub mod verify;

use thiserror::Error;

pub use config::RunConfig;
pub use experiment::{run_experiment, Outcome, Overrides, Summary};

#[derive(Debug, Error)]
pub enum CliError {
    #[error("invalid configuration: {0}")]
    Validation(String),

    #[error("config parse error at line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error(transparent)]
    Core(#[from] dotshape::Error),

    #[error("output error: {0}")]
    Output(#[from] std::io::Error),
}

impl CliError {
    /// 2 for invalid input, 3 for solver failures, 4 for step failures.
    pub fn exit_code(&self) -> i32 {
        use dotshape::Error as E;
        match self {
            CliError::Core(E::Solver { .. } | E::Oracle(_)) => 3,
            CliError::Core(E::StepFailure(_) | E::InvertedMesh { .. }) => 4,
            _ => 2,
        }
    }
}
