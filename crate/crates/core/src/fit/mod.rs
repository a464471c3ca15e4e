//! Fringe fitting: per-slice Gaussian-envelope cosine fits, circular
//! statistics and aggregation into phase shift, visibility and average
//! intensity.

mod aggregate;
pub mod circular;
mod guess;
pub mod lm;
mod params;
mod slice;

pub use aggregate::{
    aggregate, calibrate, calibrate_norm, fit_images, fit_interferogram, Calibration, CalibrationRun,
    EstimateFlag, FringeEstimate, SliceOutcome, LOW_VISIBILITY,
};
pub use guess::{initial_guess, MIN_SLICE_LEN};
pub use params::{index, FringeParams, PARAM_NAMES};
pub use slice::{fit_slice, fit_slice_auto, fit_slice_with, Covariance, SliceFit, MAX_PHASE_SIGMA, VISIBILITY_SOFT_CAP};

use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum FitError {
    #[error("slice has {len} samples, need at least {min}", min = MIN_SLICE_LEN)]
    TooShort { len: usize },
    #[error("non-finite value in slice or parameters")]
    NonFinite,
    #[error("degenerate slice: all samples equal")]
    Degenerate,
    #[error("fit did not converge after {iterations} iterations")]
    NonConvergence { last: FringeParams, iterations: usize },
    #[error("singular Jacobian: {parameter} is not identifiable")]
    Singular { parameter: &'static str },
    #[error("every slice fit failed")]
    AllFailed,
    #[error("{failed} of {total} slice fits failed")]
    TooManyFailures { failed: usize, total: usize },
    #[error("normalisation reference must be positive, got {0}")]
    BadNorm(f64),
    #[error("calibration sweep is empty")]
    EmptySweep,
}
