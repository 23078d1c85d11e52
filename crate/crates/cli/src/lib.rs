//! Scenario ingestion, command dispatch and deterministic report emission
//! for the `portcli` binary.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

use std::path::PathBuf;

use thiserror::Error;
use tradeoff_core::ErrorClass;

pub mod commands;
pub mod scenario;
pub mod table;

pub use commands::{counterexample_scenario, run_command, Command, RunOptions};
pub use scenario::{parse_scenario, Scenario};
pub use table::emit_table;

pub const EXIT_IO: i32 = 1;
pub const EXIT_VALIDATION: i32 = 2;
pub const EXIT_SOLVER: i32 = 3;
pub const EXIT_PATHOLOGY: i32 = 4;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("ParseError at line {line}, column {column}: {message}")]
    Parse { line: usize, column: usize, message: String },
    #[error("ValidationError: {0}")]
    Validation(String),
    #[error("UsageError: {0}")]
    Usage(String),
    #[error(transparent)]
    Core(#[from] tradeoff_core::Error),
    #[error("IoError: {path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Parse { .. } | CliError::Validation(_) | CliError::Usage(_) => EXIT_VALIDATION,
            CliError::Core(e) => match e.class() {
                ErrorClass::Validation => EXIT_VALIDATION,
                ErrorClass::Solver => EXIT_SOLVER,
                ErrorClass::Pathology => EXIT_PATHOLOGY,
            },
            CliError::Io { .. } => EXIT_IO,
        }
    }
}

/// Scenario files shipped with the binary, by file name.
pub fn bundled_scenarios() -> Vec<(&'static str, &'static str)> {
    vec![
        ("f1.json", include_str!("../scenarios/f1.json")),
        ("f1_alpha4_5.json", include_str!("../scenarios/f1_alpha4_5.json")),
        ("f2.json", include_str!("../scenarios/f2.json")),
        ("dominating.json", include_str!("../scenarios/dominating.json")),
        ("fair_game.json", include_str!("../scenarios/fair_game.json")),
        ("counterexample.json", include_str!("../scenarios/counterexample.json")),
    ]
}
