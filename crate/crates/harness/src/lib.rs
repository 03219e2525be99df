//! Experiment harness: drives the phantom simulator, the tissue tracker,
//! and the servo loop on one simulated clock and writes the results as
//! per-frame CSV plus JSON summaries.
//!
//! Three experiment kinds are supported:
//!
//! - tracking accuracy: tracker vs. ground-truth tissue pose, no robot;
//! - servo accuracy: full closed loop, plant pose vs. the ground-truth
//!   compensated target;
//! - NCC stability: paired closed-loop runs with motion compensation on
//!   and off, scored by ultrasound slice correlation against the first
//!   slice.
//!
//! Every run is a pure function of its [`config::ExperimentConfig`]:
//! reruns with the same config and seed produce byte-identical CSV files.

pub mod config;
pub mod experiments;
pub mod loops;
pub mod metrics;
pub mod ncc;
pub mod report;
pub mod scenario;

use std::fmt;

/// Top-level failure of an experiment run, split by exit code.
#[derive(Debug)]
pub enum HarnessError {
    /// Invalid configuration (exit code 1).
    Config(String),
    /// Tracker initialization or closed-loop failure (exit code 2).
    Tracking(String),
    /// Report or config file I/O (exit code 3).
    Io(String),
}

impl HarnessError {
    pub fn exit_code(&self) -> i32 {
        match self {
            HarnessError::Config(_) => 1,
            HarnessError::Tracking(_) => 2,
            HarnessError::Io(_) => 3,
        }
    }
}

impl fmt::Display for HarnessError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            HarnessError::Config(msg) => write!(f, "config error: {msg}"),
            HarnessError::Tracking(msg) => write!(f, "tracking failure: {msg}"),
            HarnessError::Io(msg) => write!(f, "i/o error: {msg}"),
        }
    }
}

impl std::error::Error for HarnessError {}

impl From<report::ReportError> for HarnessError {
    fn from(err: report::ReportError) -> Self {
        match err {
            report::ReportError::Empty => {
                HarnessError::Tracking("experiment produced no samples".into())
            }
            report::ReportError::Io(e) => HarnessError::Io(e.to_string()),
        }
    }
}
