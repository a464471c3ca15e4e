use std::collections::BTreeSet;

use rayon::prelude::*;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use super::circular::{circular_mean, circular_std};
use super::{fit_slice_auto, FitError, SliceFit};
use crate::angle::wrap_phase;
use crate::optics::Interferogram;
use crate::quantum::QubitState;

/// Visibility below which an estimate is flagged `low-visibility`.
pub const LOW_VISIBILITY: f64 = 0.02;

pub type SliceOutcome = Result<SliceFit, FitError>;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum EstimateFlag {
    PhaseIndeterminate,
    LowVisibility,
    FitFailures,
    /// `avg_intensity` is in raw counts because no normalisation was given.
    Unnormalized,
}

/// Phase shift, visibility and normalised average intensity of one
/// acquisition, with their spreads.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FringeEstimate {
    pub phase_shift: f64,
    /// Circular standard deviation of the per-slice phases.
    #[serde(serialize_with = "finite_or_null", deserialize_with = "null_as_infinity")]
    pub phase_std: f64,
    pub visibility: f64,
    pub visibility_std: f64,
    pub avg_intensity: f64,
    pub avg_intensity_std: f64,
    pub n_slices_used: usize,
    #[serde(default)]
    pub flags: BTreeSet<EstimateFlag>,
}

fn finite_or_null<S: Serializer>(v: &f64, s: S) -> Result<S::Ok, S::Error> {
    if v.is_finite() {
        s.serialize_f64(*v)
    } else {
        s.serialize_none()
    }
}

fn null_as_infinity<'de, D: Deserializer<'de>>(d: D) -> Result<f64, D::Error> {
    Ok(Option::<f64>::deserialize(d)?.unwrap_or(f64::INFINITY))
}

impl FringeEstimate {
    /// A noise-free estimate carrying exact observables.
    pub fn exact(phase_shift: f64, visibility: f64, avg_intensity: f64) -> Self {
        Self {
            phase_shift: wrap_phase(phase_shift),
            phase_std: 0.0,
            visibility,
            visibility_std: 0.0,
            avg_intensity,
            avg_intensity_std: 0.0,
            n_slices_used: 1,
            flags: BTreeSet::new(),
        }
    }

    pub fn has(&self, flag: EstimateFlag) -> bool {
        self.flags.contains(&flag)
    }

    /// Subtracts a calibration phase from the phase shift.
    pub fn referenced_to(mut self, phase_reference: f64) -> Self {
        self.phase_shift = wrap_phase(self.phase_shift - phase_reference);
        self
    }

    /// Normalises an unnormalised estimate against `norm_reference`.
    pub fn normalised(mut self, norm_reference: f64) -> Result<Self, FitError> {
        if !(norm_reference > 0.0) || !norm_reference.is_finite() {
            return Err(FitError::BadNorm(norm_reference));
        }
        if self.flags.remove(&EstimateFlag::Unnormalized) {
            self.avg_intensity = (0.5 * self.avg_intensity / norm_reference).clamp(0.0, 1.0);
            self.avg_intensity_std *= 0.5 / norm_reference;
        }
        Ok(self)
    }
}

fn mean_and_stderr(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    if xs.len() < 2 {
        return (mean, 0.0);
    }
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, (var / n).sqrt())
}

/// Aggregates per-slice fits. `norm_reference` is the calibration mean
/// intensity that maps to `Ī = 1/2`; without it the intensity stays in raw
/// counts and the estimate is flagged [`EstimateFlag::Unnormalized`].
///
/// Failed slices are dropped; at least half must succeed.
pub fn aggregate(per_slice: &[SliceOutcome], norm_reference: Option<f64>) -> Result<FringeEstimate, FitError> {
    if let Some(r) = norm_reference {
        if !(r > 0.0) || !r.is_finite() {
            return Err(FitError::BadNorm(r));
        }
    }
    let fits: Vec<&SliceFit> = per_slice.iter().filter_map(|r| r.as_ref().ok()).collect();
    let total = per_slice.len();
    let failed = total - fits.len();
    if fits.is_empty() {
        return Err(FitError::AllFailed);
    }
    if 2 * failed > total {
        return Err(FitError::TooManyFailures { failed, total });
    }

    let mut flags = BTreeSet::new();
    if failed > 0 {
        flags.insert(EstimateFlag::FitFailures);
    }

    let phases: Vec<f64> = fits
        .iter()
        .filter(|f| !f.phase_indeterminate)
        .map(|f| f.params.phase)
        .collect();
    let (mut phase_shift, mut phase_std) = match circular_mean(&phases) {
        Some(m) => (m, circular_std(&phases)),
        None => (0.0, f64::INFINITY),
    };
    if 2 * phases.len() < fits.len() || !phase_std.is_finite() {
        flags.insert(EstimateFlag::PhaseIndeterminate);
        phase_std = f64::INFINITY;
        if phases.is_empty() {
            phase_shift = 0.0;
        }
    }

    let vis: Vec<f64> = fits.iter().map(|f| f.params.visibility).collect();
    let (visibility, visibility_std) = mean_and_stderr(&vis);
    let visibility = visibility.clamp(0.0, 1.0);
    if visibility < LOW_VISIBILITY {
        flags.insert(EstimateFlag::LowVisibility);
    }

    let levels: Vec<f64> = fits.iter().map(|f| f.mean_intensity).collect();
    let (level, level_err) = mean_and_stderr(&levels);
    let (avg_intensity, avg_intensity_std) = match norm_reference {
        Some(r) => ((0.5 * level / r).clamp(0.0, 1.0), 0.5 * level_err / r),
        None => {
            flags.insert(EstimateFlag::Unnormalized);
            (level, level_err)
        }
    };

    Ok(FringeEstimate {
        phase_shift: wrap_phase(phase_shift),
        phase_std,
        visibility,
        visibility_std,
        avg_intensity,
        avg_intensity_std,
        n_slices_used: fits.len(),
        flags,
    })
}

/// Fits every row of an image.
pub fn fit_interferogram(image: &Interferogram) -> Vec<SliceOutcome> {
    (0..image.rows())
        .into_par_iter()
        .map(|i| fit_slice_auto(image.row(i)))
        .collect()
}

/// Fits every row of every image, in order.
pub fn fit_images(images: &[Interferogram]) -> Vec<SliceOutcome> {
    images.iter().flat_map(fit_interferogram).collect()
}

/// Normalisation constants derived from a wave-plate-only sweep.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Calibration {
    /// Background-free mean slice intensity mapped to `Ī = 1/2`.
    pub norm_reference: f64,
    /// Interferometer phase removed from every reported phase shift.
    pub phase_reference: f64,
}

/// One acquisition of the calibration sweep.
#[derive(Debug, Clone)]
pub struct CalibrationRun {
    /// Unnormalised estimate for the run.
    pub estimate: FringeEstimate,
    /// The state the run was prepared in, when known.
    pub expected: Option<QubitState>,
}

/// Maximum background-subtracted mean intensity over a sweep of
/// wave-plate-only acquisitions.
pub fn calibrate_norm(hwp_sweep: &[Vec<Interferogram>]) -> Result<f64, FitError> {
    if hwp_sweep.is_empty() {
        return Err(FitError::EmptySweep);
    }
    let mut best = f64::NEG_INFINITY;
    for run in hwp_sweep {
        let est = aggregate(&fit_images(run), None)?;
        best = best.max(est.avg_intensity);
    }
    if !(best > 0.0) {
        return Err(FitError::BadNorm(best));
    }
    Ok(best)
}

/// Norm and phase reference from calibration runs.
///
/// The phase reference is the circular mean of `Φ_measured − φ_expected`
/// over runs with a usable fringe; runs without a known state contribute
/// `Φ_measured` directly.
pub fn calibrate(runs: &[CalibrationRun]) -> Result<Calibration, FitError> {
    if runs.is_empty() {
        return Err(FitError::EmptySweep);
    }
    let norm_reference = runs
        .iter()
        .map(|r| r.estimate.avg_intensity)
        .fold(f64::NEG_INFINITY, f64::max);
    if !(norm_reference > 0.0) {
        return Err(FitError::BadNorm(norm_reference));
    }
    let offsets: Vec<f64> = runs
        .iter()
        .filter(|r| !r.estimate.has(EstimateFlag::PhaseIndeterminate) && r.estimate.visibility > 0.05)
        .filter_map(|r| match &r.expected {
            Some(s) if s.theta().sin() > 0.1 => Some(r.estimate.phase_shift - s.phi()),
            Some(_) => None,
            None => Some(r.estimate.phase_shift),
        })
        .collect();
    Ok(Calibration {
        norm_reference,
        phase_reference: circular_mean(&offsets).map_or(0.0, wrap_phase),
    })
}
