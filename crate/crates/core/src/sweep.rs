//! The waveplate-grid experiment: prepare each `(α, β)` setting, measure
//! it, reconstruct, and compare with the Jones-model prediction.

use std::f64::consts::{FRAC_PI_2, PI};
use std::fmt::Write as _;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::fit::{Calibration, EstimateFlag, FringeEstimate};
use crate::optics::{fringe_observables, prepare_qubit, FringeObservables, FringeSource, InterferometerConfig, PreparationSetting};
use crate::pipeline::{derive_seed, measure};
use crate::quantum::{fidelity, QubitState};
use crate::reconstruct::{invert_qubit, reconstruct_pure_assumed};
use crate::svg::{Plot, Point, Series, Style};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SweepSpec {
    /// HWP step, radians.
    pub alpha_step: f64,
    /// QWP step, radians.
    pub beta_step: f64,
    /// HWP range is `[0, alpha_end)`.
    pub alpha_end: f64,
    /// QWP range is `[0, beta_end)`.
    pub beta_end: f64,
    /// Also measure each HWP angle without the QWP.
    pub hwp_only: bool,
}

impl Default for SweepSpec {
    fn default() -> Self {
        Self {
            alpha_step: 10f64.to_radians(),
            beta_step: 10f64.to_radians(),
            alpha_end: FRAC_PI_2,
            beta_end: PI,
            hwp_only: false,
        }
    }
}

fn steps(step: f64, end: f64) -> Vec<f64> {
    if !(step > 0.0) || !step.is_finite() {
        return Vec::new();
    }
    (0..).map(|i| i as f64 * step).take_while(|v| *v < end - 1e-9).collect()
}

impl SweepSpec {
    pub fn settings(&self) -> Vec<PreparationSetting> {
        let alphas = steps(self.alpha_step, self.alpha_end);
        let betas = steps(self.beta_step, self.beta_end);
        let mut out: Vec<PreparationSetting> = alphas
            .iter()
            .flat_map(|&a| betas.iter().map(move |&b| PreparationSetting::new(a, b)))
            .collect();
        if self.hwp_only {
            out.extend(alphas.iter().map(|&a| PreparationSetting::hwp_only(a)));
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepPoint {
    pub setting: PreparationSetting,
    pub prepared: QubitState,
    pub theory: FringeObservables,
    pub outcome: Result<PointResult, String>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PointResult {
    pub estimate: FringeEstimate,
    /// Fidelity of the pure-state reconstruction with the prepared state.
    pub fidelity: f64,
    /// Fidelity of the mixed-state reconstruction with the prepared state.
    pub fidelity_mixed: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepResult {
    pub calibration: Calibration,
    pub points: Vec<SweepPoint>,
}

/// Runs the full pipeline on every setting of `spec`. Each setting draws
/// noise from its own seed derived from `cfg.rng_seed`.
pub fn run_sweep(spec: &SweepSpec, cfg: &InterferometerConfig, calibration: &Calibration) -> SweepResult {
    let points = spec
        .settings()
        .into_par_iter()
        .enumerate()
        .map(|(i, setting)| {
            let prepared = prepare_qubit(&setting);
            let point_cfg = InterferometerConfig {
                rng_seed: derive_seed(cfg.rng_seed, i as u64),
                ..cfg.clone()
            };
            let outcome = measure_point(&prepared, &point_cfg, calibration);
            SweepPoint {
                setting,
                prepared,
                theory: fringe_observables(&prepared),
                outcome,
            }
        })
        .collect();
    SweepResult {
        calibration: *calibration,
        points,
    }
}

fn measure_point(prepared: &QubitState, cfg: &InterferometerConfig, calibration: &Calibration) -> Result<PointResult, String> {
    let m = measure(&FringeSource::Qubit(*prepared), cfg, calibration).map_err(|e| e.to_string())?;
    let target = prepared.density_matrix();
    let pure = reconstruct_pure_assumed(&m.estimate).map_err(|e| e.to_string())?;
    let mixed = invert_qubit(&m.estimate).map_err(|e| e.to_string())?;
    Ok(PointResult {
        fidelity: fidelity(&pure.rho, &target).map_err(|e| e.to_string())?,
        fidelity_mixed: fidelity(&mixed.rho, &target).map_err(|e| e.to_string())?,
        estimate: m.estimate,
    })
}

/// File stem, axis label, theory value and measured value with error bar.
type Observable = (&'static str, &'static str, fn(&FringeObservables) -> f64, fn(&FringeEstimate) -> (f64, f64));

impl SweepResult {
    /// Mean pure-reconstruction fidelity over all settings; failed settings
    /// count as zero.
    pub fn mean_fidelity(&self) -> f64 {
        self.mean_of(|r| r.fidelity)
    }

    pub fn mean_fidelity_mixed(&self) -> f64 {
        self.mean_of(|r| r.fidelity_mixed)
    }

    fn mean_of(&self, f: impl Fn(&PointResult) -> f64) -> f64 {
        if self.points.is_empty() {
            return f64::NAN;
        }
        let total: f64 = self.points.iter().map(|p| p.outcome.as_ref().map_or(0.0, &f)).sum();
        total / self.points.len() as f64
    }

    pub fn failures(&self) -> usize {
        self.points.iter().filter(|p| p.outcome.is_err()).count()
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from(
            "alpha_deg,beta_deg,qwp,theta,phi,phase_shift,phase_std,visibility,visibility_std,avg_intensity,avg_intensity_std,theory_phase_shift,theory_visibility,theory_avg_intensity,fidelity,fidelity_mixed,flags,error\n",
        );
        for p in &self.points {
            let s = &p.setting;
            let _ = write!(
                out,
                "{},{},{},{},{},",
                s.alpha.to_degrees(),
                if s.qwp_present { s.beta.to_degrees() } else { f64::NAN },
                s.qwp_present,
                p.prepared.theta(),
                p.prepared.phi()
            );
            match &p.outcome {
                Ok(r) => {
                    let e = &r.estimate;
                    let flags: Vec<String> = e.flags.iter().map(flag_name).collect();
                    let _ = writeln!(
                        out,
                        "{},{},{},{},{},{},{},{},{},{},{},{},",
                        e.phase_shift,
                        e.phase_std,
                        e.visibility,
                        e.visibility_std,
                        e.avg_intensity,
                        e.avg_intensity_std,
                        p.theory.phase_shift,
                        p.theory.visibility,
                        p.theory.avg_intensity,
                        r.fidelity,
                        r.fidelity_mixed,
                        flags.join(";")
                    );
                }
                Err(msg) => {
                    let _ = writeln!(
                        out,
                        ",,,,,,{},{},{},,,,{}",
                        p.theory.phase_shift,
                        p.theory.visibility,
                        p.theory.avg_intensity,
                        msg.replace(',', ";")
                    );
                }
            }
        }
        out
    }

    /// Phase shift, visibility and average intensity against β, one colour
    /// per HWP angle, theory as lines and measurements as points with
    /// error bars. A second set against α covers HWP-only settings.
    pub fn plots(&self) -> Vec<(String, Plot)> {
        let mut out = Vec::new();
        let observables: [Observable; 3] = [
            ("phase_shift", "Φ (rad)", |o| o.phase_shift, |e| (e.phase_shift, e.phase_std)),
            ("visibility", "V", |o| o.visibility, |e| (e.visibility, e.visibility_std)),
            ("avg_intensity", "Ī", |o| o.avg_intensity, |e| (e.avg_intensity, e.avg_intensity_std)),
        ];

        let mut alphas: Vec<f64> = self.points.iter().filter(|p| p.setting.qwp_present).map(|p| p.setting.alpha).collect();
        alphas.sort_by(f64::total_cmp);
        alphas.dedup();
        let hwp_only: Vec<&SweepPoint> = self.points.iter().filter(|p| !p.setting.qwp_present).collect();

        for (name, label, theory, measured) in observables {
            if !alphas.is_empty() {
                let mut plot = Plot {
                    title: format!("{label} vs QWP angle"),
                    x_label: "β (deg)".into(),
                    y_label: label.into(),
                    series: Vec::new(),
                };
                for (ci, &alpha) in alphas.iter().enumerate() {
                    let curve = (0..=180)
                        .map(|b| {
                            let s = prepare_qubit(&PreparationSetting::new(alpha, (b as f64).to_radians()));
                            Point { x: b as f64, y: theory(&fringe_observables(&s)), err: None }
                        })
                        .collect();
                    plot.series.push(Series {
                        label: format!("α = {:.0}°", alpha.to_degrees()),
                        style: Style::Line,
                        color: ci,
                        points: curve,
                    });
                    let pts = self
                        .points
                        .iter()
                        .filter(|p| p.setting.qwp_present && p.setting.alpha == alpha)
                        .filter_map(|p| p.outcome.as_ref().ok().map(|r| (p, r)))
                        .map(|(p, r)| {
                            let (y, e) = measured(&r.estimate);
                            Point { x: p.setting.beta.to_degrees(), y, err: Some(e) }
                        })
                        .collect();
                    plot.series.push(Series {
                        label: String::new(),
                        style: Style::Markers,
                        color: ci,
                        points: pts,
                    });
                }
                out.push((format!("{name}_vs_beta.svg"), plot));
            }
            if !hwp_only.is_empty() {
                let curve = (0..=90)
                    .map(|a| {
                        let s = prepare_qubit(&PreparationSetting::hwp_only((a as f64).to_radians()));
                        Point { x: a as f64, y: theory(&fringe_observables(&s)), err: None }
                    })
                    .collect();
                let pts = hwp_only
                    .iter()
                    .filter_map(|p| p.outcome.as_ref().ok().map(|r| (p, r)))
                    .map(|(p, r)| {
                        let (y, e) = measured(&r.estimate);
                        Point { x: p.setting.alpha.to_degrees(), y, err: Some(e) }
                    })
                    .collect();
                out.push((
                    format!("{name}_hwp_only.svg"),
                    Plot {
                        title: format!("{label} vs HWP angle, no QWP"),
                        x_label: "α (deg)".into(),
                        y_label: label.into(),
                        series: vec![
                            Series { label: "theory".into(), style: Style::Line, color: 0, points: curve },
                            Series { label: "simulated".into(), style: Style::Markers, color: 3, points: pts },
                        ],
                    },
                ));
            }
        }
        out
    }
}

pub(crate) fn flag_name(f: &EstimateFlag) -> String {
    serde_json::to_value(f)
        .ok()
        .and_then(|v| v.as_str().map(str::to_owned))
        .unwrap_or_default()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::angle::phase_difference;
    use crate::pipeline::ideal_calibration;

    #[test]
    fn grid_shape() {
        let spec = SweepSpec {
            hwp_only: true,
            ..Default::default()
        };
        let s = spec.settings();
        assert_eq!(s.len(), 9 * 18 + 9);
        assert_eq!(s.iter().filter(|p| !p.qwp_present).count(), 9);
        assert!(steps(0.0, 1.0).is_empty());
    }

    #[test]
    fn noiseless_sweep_lies_on_theory() {
        let cfg = InterferometerConfig {
            n_slices: 2,
            n_images: 1,
            ..InterferometerConfig::default().noiseless()
        };
        let spec = SweepSpec {
            alpha_step: 30f64.to_radians(),
            beta_step: 45f64.to_radians(),
            hwp_only: true,
            ..Default::default()
        };
        let r = run_sweep(&spec, &cfg, &ideal_calibration(&cfg));
        for p in &r.points {
            let e = &p.outcome.as_ref().unwrap().estimate;
            assert!((e.visibility - p.theory.visibility).abs() < 1e-6, "{p:?}");
            assert!((e.avg_intensity - p.theory.avg_intensity).abs() < 1e-6, "{p:?}");
            if p.theory.visibility > 1e-3 {
                assert!(phase_difference(e.phase_shift, p.theory.phase_shift).abs() < 1e-6, "{p:?}");
            }
        }
        assert!(r.mean_fidelity() > 1.0 - 1e-9);
        let csv = r.to_csv();
        assert_eq!(csv.lines().count(), r.points.len() + 1);
        let plots = r.plots();
        assert_eq!(plots.len(), 6);
    }
}
