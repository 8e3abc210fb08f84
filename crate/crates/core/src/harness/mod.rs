//! Data files, run configuration, experiment orchestration and reports.

mod config;
mod pipeline;
mod records;
mod report;

pub mod cli;

use std::path::{Path, PathBuf};

use thiserror::Error;

use crate::behavior::BehaviorError;
use crate::classifier::ClassifierError;
use crate::robosim::SimError;
use crate::signal::SignalError;
use crate::synth::SynthError;

pub use config::{Controllers, Counts, RunConfig};
pub use pipeline::{
    block_plan, run_classify, run_fit, run_pipeline, run_simulation, synth_split, write_eval, write_sim_trials_csv,
    PipelinePaths, SimBlock, SimReport, Split,
};
pub use records::{load_trials, read_trials, save_trials, write_trials, LoadedTrials, Rejection, TrialRecord, TRIAL_CSV_HEADER};
pub use report::{build_report, write_report, BusySummary, LabelSummary, NetTimeSummary, PhaseSummary, Report, ReportInputs};

/// Process exit codes.
pub mod exit {
    pub const OK: i32 = 0;
    pub const USAGE: i32 = 2;
    pub const PARSE: i32 = 3;
    pub const MODEL: i32 = 4;
    pub const SIMULATION: i32 = 5;
    pub const IO: i32 = 6;
}

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error("usage: {0}")]
    Usage(String),
    #[error("config: {0}")]
    Config(String),
    #[error("line {line}: {message}")]
    Parse { line: u64, message: String },
    #[error("input: {0}")]
    Input(String),
    #[error(transparent)]
    Signal(#[from] SignalError),
    #[error(transparent)]
    Model(#[from] BehaviorError),
    #[error(transparent)]
    Classifier(#[from] ClassifierError),
    #[error(transparent)]
    Synth(#[from] SynthError),
    #[error(transparent)]
    Simulation(#[from] SimError),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
}

impl HarnessError {
    pub(crate) fn parse(line: u64, e: impl std::fmt::Display) -> Self {
        Self::Parse {
            line,
            message: e.to_string(),
        }
    }

    pub(crate) fn io(path: &Path, source: std::io::Error) -> Self {
        Self::Io {
            path: path.to_path_buf(),
            source,
        }
    }

    pub fn exit_code(&self) -> i32 {
        match self {
            Self::Usage(_) | Self::Config(_) | Self::Synth(_) => exit::USAGE,
            Self::Parse { .. } | Self::Input(_) | Self::Json(_) | Self::Signal(_) => exit::PARSE,
            Self::Model(BehaviorError::Io(_)) => exit::IO,
            Self::Model(_) | Self::Classifier(_) => exit::MODEL,
            Self::Simulation(_) => exit::SIMULATION,
            Self::Io { .. } | Self::Csv(_) => exit::IO,
        }
    }
}

pub(crate) fn write_file(path: &Path, contents: impl AsRef<[u8]>) -> Result<(), HarnessError> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).map_err(|e| HarnessError::io(dir, e))?;
    }
    std::fs::write(path, contents).map_err(|e| HarnessError::io(path, e))
}

pub(crate) fn read_file(path: &Path) -> Result<String, HarnessError> {
    std::fs::read_to_string(path).map_err(|e| HarnessError::io(path, e))
}
