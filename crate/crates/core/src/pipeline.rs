//! End-to-end helpers: synthesize, fit, normalise and reference one
//! acquisition.

use rayon::prelude::*;
use thiserror::Error;

use crate::fit::{aggregate, calibrate, fit_images, fit_slice_auto, Calibration, CalibrationRun, FitError, FringeEstimate, SliceOutcome};
use crate::optics::{
    prepare_qubit, synthesize_set, FringeSource, Interferogram, InterferometerConfig, PreparationSetting, SynthError,
};
use crate::quantum::QuditPureState;
use crate::reconstruct::{invert_qudit, ReconstructError, ReconstructionResult};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum PipelineError {
    #[error(transparent)]
    Synth(#[from] SynthError),
    #[error(transparent)]
    Fit(#[from] FitError),
    #[error(transparent)]
    Reconstruct(#[from] ReconstructError),
}

/// Independent seed for sub-run `tag` of a run seeded with `base`
/// (SplitMix64 finaliser).
pub fn derive_seed(base: u64, tag: u64) -> u64 {
    let mut z = base ^ tag.wrapping_add(1).wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Tag space used for calibration runs, disjoint from grid indices.
const CALIBRATION_TAG: u64 = 1 << 40;

/// HWP angles of the default calibration sweep: `0..90°` in 5° steps, which
/// includes the 45° setting where the prepared state sits at the pole.
pub fn default_calibration_angles() -> Vec<f64> {
    (0..18).map(|i| (5.0 * i as f64).to_radians()).collect()
}

/// Fitted slices and the estimate for one acquisition.
#[derive(Debug, Clone)]
pub struct Measurement {
    pub slices: Vec<SliceOutcome>,
    pub estimate: FringeEstimate,
}

/// Fits `images` and aggregates. With a calibration the estimate is
/// normalised and phase-referenced; without one it stays unnormalised.
pub fn estimate_images(images: &[Interferogram], calibration: Option<&Calibration>) -> Result<Measurement, FitError> {
    let slices = fit_images(images);
    let estimate = match calibration {
        Some(c) => aggregate(&slices, Some(c.norm_reference))?.referenced_to(c.phase_reference),
        None => aggregate(&slices, None)?,
    };
    Ok(Measurement { slices, estimate })
}

/// Like [`estimate_images`], but each image is first summed over its rows
/// and fitted as a single profile. Suited to very low photon counts.
pub fn estimate_binned(images: &[Interferogram], calibration: &Calibration) -> Result<Measurement, FitError> {
    let slices: Vec<SliceOutcome> = images
        .iter()
        .map(|img| {
            let mut sum = vec![0.0; img.width()];
            for row in img.row_iter() {
                sum.iter_mut().zip(row).for_each(|(s, v)| *s += v);
            }
            fit_slice_auto(&sum).map(|mut f| {
                f.mean_intensity /= img.rows() as f64;
                f
            })
        })
        .collect();
    let estimate = aggregate(&slices, Some(calibration.norm_reference))?.referenced_to(calibration.phase_reference);
    Ok(Measurement { slices, estimate })
}

/// Synthesizes and measures one source.
pub fn measure(source: &FringeSource, cfg: &InterferometerConfig, calibration: &Calibration) -> Result<Measurement, PipelineError> {
    let images = synthesize_set(source, cfg)?;
    Ok(estimate_images(&images, Some(calibration))?)
}

/// Synthesizes the wave-plate-only sweep at `alphas` and derives the
/// normalisation and phase reference from it.
pub fn calibrate_with_sweep(cfg: &InterferometerConfig, alphas: &[f64]) -> Result<Calibration, PipelineError> {
    let runs = alphas
        .par_iter()
        .enumerate()
        .map(|(i, &alpha)| {
            let setting = PreparationSetting::hwp_only(alpha);
            let state = prepare_qubit(&setting);
            let run_cfg = InterferometerConfig {
                rng_seed: derive_seed(cfg.rng_seed, CALIBRATION_TAG + i as u64),
                ..cfg.clone()
            };
            let images = synthesize_set(&FringeSource::Qubit(state), &run_cfg)?;
            let m = estimate_images(&images, None)?;
            Ok(CalibrationRun {
                estimate: m.estimate,
                expected: Some(state),
            })
        })
        .collect::<Result<Vec<_>, PipelineError>>()?;
    Ok(calibrate(&runs)?)
}

/// The calibration an ideal instrument would produce: the analytic mean
/// intensity at `Ī = 1/2` and the configured phase offset.
pub fn ideal_calibration(cfg: &InterferometerConfig) -> Calibration {
    Calibration {
        norm_reference: cfg.reference_mean_intensity(),
        phase_reference: crate::angle::wrap_phase(cfg.phase_offset),
    }
}

/// Measures all `d − 1` subspace interferograms of a qudit and inverts them.
pub fn measure_qudit(
    state: &QuditPureState,
    cfg: &InterferometerConfig,
    calibration: &Calibration,
) -> Result<(Vec<FringeEstimate>, ReconstructionResult), PipelineError> {
    let estimates = (1..state.dim())
        .map(|k| {
            let sub_cfg = InterferometerConfig {
                rng_seed: derive_seed(cfg.rng_seed, k as u64),
                ..cfg.clone()
            };
            let source = FringeSource::Qudit {
                state: state.clone(),
                subspace: k,
            };
            measure(&source, &sub_cfg, calibration).map(|m| m.estimate)
        })
        .collect::<Result<Vec<_>, _>>()?;
    let result = invert_qudit(&estimates, state.dim())?;
    Ok((estimates, result))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::optics::fringe_observables;
    use crate::quantum::QubitState;

    #[test]
    fn seeds_are_distinct() {
        let s: std::collections::BTreeSet<u64> = (0..1000).map(|t| derive_seed(7, t)).collect();
        assert_eq!(s.len(), 1000);
        assert_ne!(derive_seed(1, 0), derive_seed(2, 0));
    }

    #[test]
    fn noiseless_calibration_matches_ideal() {
        let cfg = InterferometerConfig {
            n_slices: 2,
            n_images: 1,
            phase_offset: 0.4,
            ..InterferometerConfig::default().noiseless()
        };
        let cal = calibrate_with_sweep(&cfg, &default_calibration_angles()).unwrap();
        let ideal = ideal_calibration(&cfg);
        assert!((cal.norm_reference / ideal.norm_reference - 1.0).abs() < 1e-6, "{cal:?} {ideal:?}");
        assert!((cal.phase_reference - 0.4).abs() < 1e-6);
    }

    #[test]
    fn noiseless_measurement_is_exact() {
        let cfg = InterferometerConfig {
            n_slices: 3,
            n_images: 1,
            ..InterferometerConfig::default().noiseless()
        };
        let s = QubitState::new(1.1, -0.8, 0.7).unwrap();
        let m = measure(&FringeSource::Qubit(s), &cfg, &ideal_calibration(&cfg)).unwrap();
        let o = fringe_observables(&s);
        assert!((m.estimate.phase_shift - o.phase_shift).abs() < 1e-6);
        assert!((m.estimate.visibility - o.visibility).abs() < 1e-6);
        assert!((m.estimate.avg_intensity - o.avg_intensity).abs() < 1e-6);
    }
}
