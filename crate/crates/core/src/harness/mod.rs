//! Experiment configuration, orchestration and artifact emission for the
//! `anderson-lab` command.
//!
//! Exit codes: 0 success, 1 a check inside the run failed, 2 invalid
//! configuration, 3 resource or I/O failure.

mod config;
mod output;
mod run;

pub use config::{
    parse_config, parse_config_text, parse_intervals, parse_list, Experiment, ExperimentConfig, Overrides,
    OUTPUT_DIR_ENV,
};
pub use output::{emit_results, sha256_hex, write_atomic, Cell, ResultFile, RunManifest, Table, STAT_HEADER};
pub use run::{run_experiment, RunOutcome, MINAMI_RATIO_TOLERANCE, MINAMI_VARIANCE_TOLERANCE};

use crate::LabError;

#[derive(Debug, thiserror::Error)]
pub enum HarnessError {
    #[error("{0}")]
    Config(String),
    #[error("{0}")]
    Resource(String),
}

impl HarnessError {
    pub fn exit_code(&self) -> i32 {
        match self {
            HarnessError::Config(_) => 2,
            HarnessError::Resource(_) => 3,
        }
    }
}

impl From<LabError> for HarnessError {
    fn from(e: LabError) -> Self {
        match e {
            LabError::VolumeCap { .. } | LabError::Io(_) | LabError::NoConvergence { .. } => {
                HarnessError::Resource(e.to_string())
            }
            other => HarnessError::Config(other.to_string()),
        }
    }
}
