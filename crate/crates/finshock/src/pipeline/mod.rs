//! Batch pipeline: configuration, subcommand drivers, run manifests, plots.
//!
//! Every command reads a [`config::RunConfig`], writes its outputs under the
//! configured directory, and finishes by writing a [`manifest::RunManifest`]
//! recording the config hash, seed, timings, and output file hashes. Errors
//! carry a process exit code: data problems map to 1, estimation failures to
//! 2, configuration mistakes to 3.

pub mod commands;
pub mod config;
pub mod manifest;
pub mod plot;

pub use commands::{cmd_estimate, cmd_lp, cmd_measures, cmd_report, cmd_simulate};
pub use config::RunConfig;
pub use manifest::RunManifest;

use crate::bvar::BvarError;
use crate::dates::ParseDateError;
use crate::dgp::DgpError;
use crate::identification::IdentError;
use crate::inequality::InequalityError;
use crate::lp::LpError;
use crate::panel::PanelError;

/// Pipeline failure, tagged by which stage of responsibility broke.
#[derive(Debug, thiserror::Error)]
pub enum PipelineError {
    /// Input data is missing, malformed, or unusable.
    #[error("data error: {0}")]
    Data(String),
    /// Estimation failed: sampler, identification, or projection.
    #[error("estimation error: {0}")]
    Estimation(String),
    /// The run configuration is inconsistent or incomplete.
    #[error("config error: {0}")]
    Config(String),
}

impl PipelineError {
    /// Process exit code for this failure class.
    pub fn exit_code(&self) -> u8 {
        match self {
            PipelineError::Data(_) => 1,
            PipelineError::Estimation(_) => 2,
            PipelineError::Config(_) => 3,
        }
    }
}

impl From<std::io::Error> for PipelineError {
    fn from(e: std::io::Error) -> Self {
        PipelineError::Data(e.to_string())
    }
}

impl From<csv::Error> for PipelineError {
    fn from(e: csv::Error) -> Self {
        PipelineError::Data(e.to_string())
    }
}

impl From<PanelError> for PipelineError {
    fn from(e: PanelError) -> Self {
        PipelineError::Data(e.to_string())
    }
}

impl From<ParseDateError> for PipelineError {
    fn from(e: ParseDateError) -> Self {
        PipelineError::Data(e.to_string())
    }
}

impl From<InequalityError> for PipelineError {
    fn from(e: InequalityError) -> Self {
        PipelineError::Data(e.to_string())
    }
}

impl From<BvarError> for PipelineError {
    fn from(e: BvarError) -> Self {
        PipelineError::Estimation(e.to_string())
    }
}

impl From<IdentError> for PipelineError {
    fn from(e: IdentError) -> Self {
        PipelineError::Estimation(e.to_string())
    }
}

impl From<LpError> for PipelineError {
    fn from(e: LpError) -> Self {
        PipelineError::Estimation(e.to_string())
    }
}

impl From<DgpError> for PipelineError {
    fn from(e: DgpError) -> Self {
        PipelineError::Estimation(e.to_string())
    }
}

impl From<serde_json::Error> for PipelineError {
    fn from(e: serde_json::Error) -> Self {
        PipelineError::Config(e.to_string())
    }
}
