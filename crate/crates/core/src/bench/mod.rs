//! Three-setting tomography baseline and the resource comparison against
//! interferography.

mod compare;
mod qst;

pub use compare::{compare, settings_table, Comparison, ComparisonRow, Method, SettingsRow};
pub use qst::{linear_inversion, simulate_qst, QstEstimate, ShotBudget};

use thiserror::Error;

use crate::pipeline::PipelineError;
use crate::quantum::StateError;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum BenchError {
    #[error("budget of {total} shots cannot cover {settings} settings")]
    Budget { total: u64, settings: u32 },
    #[error("at least one trial is required")]
    NoTrials,
    #[error(transparent)]
    Pipeline(#[from] PipelineError),
    #[error(transparent)]
    State(#[from] StateError),
}
