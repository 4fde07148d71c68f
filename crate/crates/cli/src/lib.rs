//! Library behind the `conseq` command: recommendation with explanations,
//! catalog validation, study simulation and offline analysis.

pub mod commands;
pub mod report;
pub mod simulate;

use std::path::PathBuf;

use thiserror::Error;

use conseq_core::catalog::CatalogError;
use conseq_core::consequence::ExplainError;
use conseq_core::stats::StatsError;
use conseq_core::study::LogError;
use conseq_service::ServiceError;

pub use simulate::{simulate, Responder, Shift, SimulationConfig, SimulationError};

/// Exit code for a well-formed request with no usable result.
pub const EXIT_NO_RESULT: i32 = 1;
/// Exit code for unreadable, malformed or invalid input.
pub const EXIT_INVALID: i32 = 2;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Invalid(String),
    #[error("cannot read `{path}`: {source}")]
    Read { path: PathBuf, source: std::io::Error },
    #[error("cannot write `{path}`: {source}")]
    Write { path: PathBuf, source: std::io::Error },
    #[error(transparent)]
    Catalog(#[from] CatalogError),
    #[error("event log: {0}")]
    Log(#[from] LogError),
    #[error(transparent)]
    Simulation(#[from] SimulationError),
    #[error("{0}")]
    NoCandidate(String),
    #[error(transparent)]
    Analysis(#[from] StatsError),
    #[error(transparent)]
    Explain(#[from] ExplainError),
    #[error(transparent)]
    Service(#[from] ServiceError),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::NoCandidate(_) | CliError::Explain(_) | CliError::Service(_) => EXIT_NO_RESULT,
            CliError::Analysis(StatsError::InvalidAlpha(_) | StatsError::UnknownGroupKey(_)) => EXIT_INVALID,
            CliError::Analysis(_) => EXIT_NO_RESULT,
            CliError::Simulation(SimulationError::Protocol { .. }) => EXIT_NO_RESULT,
            _ => EXIT_INVALID,
        }
    }
}
