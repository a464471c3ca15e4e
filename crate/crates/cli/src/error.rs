use std::fmt;
use std::process::ExitCode;

use qsi_core::bench::BenchError;
use qsi_core::fit::FitError;
use qsi_core::io::IoError;
use qsi_core::optics::{ConfigError, SynthError};
use qsi_core::pipeline::PipelineError;
use qsi_core::quantum::StateError;
use qsi_core::reconstruct::ReconstructError;

/// Error classes with fixed process exit codes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Class {
    /// Bad or conflicting arguments.
    Usage = 2,
    /// File system failure.
    Io = 3,
    /// Unreadable or malformed input file.
    Format = 4,
    /// Invalid configuration or state parameters.
    Config = 5,
    /// Fringe fitting failed.
    Fit = 6,
    /// State reconstruction failed.
    Reconstruct = 7,
}

#[derive(Debug)]
pub struct CliError {
    pub class: Class,
    pub message: String,
}

impl CliError {
    pub fn new(class: Class, message: impl Into<String>) -> Self {
        Self {
            class,
            message: message.into(),
        }
    }

    pub fn usage(message: impl Into<String>) -> Self {
        Self::new(Class::Usage, message)
    }

    pub fn exit_code(&self) -> ExitCode {
        ExitCode::from(self.class as u8)
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.message)
    }
}

impl std::error::Error for CliError {}

impl From<IoError> for CliError {
    fn from(e: IoError) -> Self {
        let class = match e {
            IoError::Io { .. } => Class::Io,
            _ => Class::Format,
        };
        Self::new(class, e.to_string())
    }
}

impl From<FitError> for CliError {
    fn from(e: FitError) -> Self {
        Self::new(Class::Fit, e.to_string())
    }
}

impl From<ReconstructError> for CliError {
    fn from(e: ReconstructError) -> Self {
        Self::new(Class::Reconstruct, e.to_string())
    }
}

impl From<ConfigError> for CliError {
    fn from(e: ConfigError) -> Self {
        Self::new(Class::Config, e.to_string())
    }
}

impl From<StateError> for CliError {
    fn from(e: StateError) -> Self {
        Self::new(Class::Config, e.to_string())
    }
}

impl From<SynthError> for CliError {
    fn from(e: SynthError) -> Self {
        Self::new(Class::Config, e.to_string())
    }
}

impl From<PipelineError> for CliError {
    fn from(e: PipelineError) -> Self {
        match e {
            PipelineError::Synth(e) => e.into(),
            PipelineError::Fit(e) => e.into(),
            PipelineError::Reconstruct(e) => e.into(),
        }
    }
}

impl From<BenchError> for CliError {
    fn from(e: BenchError) -> Self {
        match e {
            BenchError::Pipeline(e) => e.into(),
            BenchError::State(e) => e.into(),
            other => Self::usage(other.to_string()),
        }
    }
}
