use std::collections::BTreeMap;
use std::fmt::Write as _;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{simulate_qst, BenchError, ShotBudget};
use crate::optics::{fringe_observables, synthesize_set, FringeSource, InterferometerConfig};
use crate::pipeline::{derive_seed, estimate_binned, ideal_calibration, PipelineError};
use crate::quantum::{fidelity, QubitState};
use crate::reconstruct::invert_qubit;
use crate::sweep::flag_name;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    Qsi,
    Qst,
}

impl Method {
    pub fn name(&self) -> &'static str {
        match self {
            Method::Qsi => "qsi",
            Method::Qst => "qst",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparisonRow {
    pub theta: f64,
    pub phi: f64,
    pub mu: f64,
    pub method: Method,
    pub shots: u64,
    pub settings: u32,
    pub fidelity_mean: f64,
    pub fidelity_std: f64,
    /// Number of trials carrying each flag; failed trials appear as `failed`.
    pub flags: BTreeMap<String, usize>,
}

/// Measurement settings needed to reconstruct a `dim`-level state.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SettingsRow {
    pub dim: usize,
    /// Interferograms for a pure state: `d − 1`.
    pub qsi: usize,
    /// Full tomography: `d² − 1`.
    pub qst: usize,
    /// Pure-state tomography: `5d − 7`.
    pub pure_qst: usize,
}

pub fn settings_table(dims: impl IntoIterator<Item = usize>) -> Vec<SettingsRow> {
    dims.into_iter()
        .filter(|&d| d >= 2)
        .map(|d| SettingsRow {
            dim: d,
            qsi: d - 1,
            qst: d * d - 1,
            pure_qst: 5 * d - 7,
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Comparison {
    pub total_shots: u64,
    pub trials: usize,
    pub seed: u64,
    pub rows: Vec<ComparisonRow>,
    pub settings: Vec<SettingsRow>,
}

fn mean_std(xs: &[f64]) -> (f64, f64) {
    if xs.is_empty() {
        return (f64::NAN, f64::NAN);
    }
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    let var = if xs.len() > 1 {
        xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0)
    } else {
        0.0
    };
    (mean, var.sqrt())
}

/// Interferogram geometry for a QSI acquisition whose expected detected
/// photon count equals `total`. Background and read noise are removed so
/// that both arms are limited by shot noise alone.
fn qsi_config(state: &QubitState, total: u64, cfg: &InterferometerConfig, seed: u64) -> InterferometerConfig {
    let mut c = InterferometerConfig {
        background: 0.0,
        read_noise_sigma: 0.0,
        shot_noise: true,
        rng_seed: seed,
        peak_counts: 1.0,
        ..cfg.clone()
    };
    let per_unit_peak = c.reference_mean_intensity() * c.image_width as f64 * (c.n_slices * c.n_images) as f64;
    let avg = fringe_observables(state).avg_intensity;
    c.peak_counts = total as f64 * 0.5 / (avg * per_unit_peak);
    c
}

fn qsi_trial(state: &QubitState, total: u64, cfg: &InterferometerConfig, seed: u64) -> Result<(f64, Vec<String>), PipelineError> {
    let c = qsi_config(state, total, cfg, seed);
    let images = synthesize_set(&FringeSource::Qubit(*state), &c)?;
    let m = estimate_binned(&images, &ideal_calibration(&c))?;
    let r = invert_qubit(&m.estimate)?;
    let f = fidelity(&r.rho, &state.density_matrix()).map_err(crate::reconstruct::ReconstructError::from)?;
    let mut flags: Vec<String> = m.estimate.flags.iter().map(flag_name).collect();
    flags.extend(r.flags.iter().filter_map(|f| serde_json::to_value(f).ok()?.as_str().map(str::to_owned)));
    Ok((f, flags))
}

/// Runs both methods `trials` times per state at the same total photon
/// number. `budget` is the tomography budget; interferography gets the same
/// total in one setting.
pub fn compare(
    states: &[QubitState],
    budget: &ShotBudget,
    cfg: &InterferometerConfig,
    trials: usize,
    seed: u64,
) -> Result<Comparison, BenchError> {
    if trials == 0 {
        return Err(BenchError::NoTrials);
    }
    let total = budget.total_shots();
    let qsi_budget = ShotBudget::qsi(total)?;
    let mut rows = Vec::with_capacity(2 * states.len());
    for (si, state) in states.iter().enumerate() {
        let target = state.density_matrix();
        let base = derive_seed(seed, si as u64);

        let qsi: Vec<Result<(f64, Vec<String>), PipelineError>> = (0..trials)
            .into_par_iter()
            .map(|t| qsi_trial(state, total, cfg, derive_seed(base, 2 * t as u64)))
            .collect();
        let mut flags = BTreeMap::new();
        let mut fids = Vec::new();
        for r in qsi {
            match r {
                Ok((f, fl)) => {
                    fids.push(f);
                    for name in fl {
                        *flags.entry(name).or_insert(0) += 1;
                    }
                }
                Err(_) => *flags.entry("failed".to_string()).or_insert(0) += 1,
            }
        }
        let (m, s) = mean_std(&fids);
        rows.push(ComparisonRow {
            theta: state.theta(),
            phi: state.phi(),
            mu: state.mu(),
            method: Method::Qsi,
            shots: total,
            settings: qsi_budget.settings(),
            fidelity_mean: m,
            fidelity_std: s,
            flags,
        });

        let mut flags = BTreeMap::new();
        let mut fids = Vec::with_capacity(trials);
        for t in 0..trials {
            let e = simulate_qst(state, budget, derive_seed(base, 2 * t as u64 + 1))?;
            if e.rescaled {
                *flags.entry("rescaled".to_string()).or_insert(0) += 1;
            }
            fids.push(fidelity(&e.rho, &target)?);
        }
        let (m, s) = mean_std(&fids);
        rows.push(ComparisonRow {
            theta: state.theta(),
            phi: state.phi(),
            mu: state.mu(),
            method: Method::Qst,
            shots: total,
            settings: budget.settings(),
            fidelity_mean: m,
            fidelity_std: s,
            flags,
        });
    }
    Ok(Comparison {
        total_shots: total,
        trials,
        seed,
        rows,
        settings: settings_table(2..=5),
    })
}

impl Comparison {
    pub fn to_csv(&self) -> String {
        let mut out = String::from("theta,phi,mu,method,shots,settings,fidelity_mean,fidelity_std,flags\n");
        for r in &self.rows {
            let flags: Vec<String> = r.flags.iter().map(|(k, v)| format!("{k}:{v}")).collect();
            let _ = writeln!(
                out,
                "{},{},{},{},{},{},{},{},{}",
                r.theta,
                r.phi,
                r.mu,
                r.method.name(),
                r.shots,
                r.settings,
                r.fidelity_mean,
                r.fidelity_std,
                flags.join(";")
            );
        }
        out
    }

    pub fn settings_csv(&self) -> String {
        let mut out = String::from("dim,qsi_settings,qst_settings,pure_qst_settings\n");
        for s in &self.settings {
            let _ = writeln!(out, "{},{},{},{}", s.dim, s.qsi, s.qst, s.pure_qst);
        }
        out
    }
}
