use serde::{Deserialize, Serialize};

use crate::quantum::{QubitState, QuditPureState, StateError};

/// The three numbers an interferogram yields.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FringeObservables {
    /// Phase of the fringe maximum, radians.
    pub phase_shift: f64,
    pub visibility: f64,
    /// Phase-averaged intensity in units where the incident intensity is 1.
    pub avg_intensity: f64,
}

/// Detector intensity `(3 + cosθ + 2μ sinθ cos(phase − φ))/8`.
pub fn intensity_curve(state: &QubitState, phase: f64) -> f64 {
    let (s, c) = state.theta().sin_cos();
    (3.0 + c + 2.0 * state.mu() * s * (phase - state.phi()).cos()) / 8.0
}

pub fn fringe_observables(state: &QubitState) -> FringeObservables {
    let (s, c) = state.theta().sin_cos();
    FringeObservables {
        phase_shift: state.phi(),
        visibility: 2.0 * state.mu() * s / (3.0 + c),
        avg_intensity: (3.0 + c) / 8.0,
    }
}

/// Intensity of the interferometer acting on the `{k, k+1}` subspace:
/// `¼(‖ψ_k‖² + ⟨Π₀⟩_k + 2|⟨σ₋⟩_k| cos(arg⟨σ₋⟩_k − phase))`.
pub fn qudit_intensity_curve(state: &QuditPureState, k: usize, phase: f64) -> Result<f64, StateError> {
    let m = state.subspace_moments(k)?;
    Ok(0.25 * (m.norm_sq + m.m_pi + 2.0 * m.m_sigma.norm() * (m.m_sigma.arg() - phase).cos()))
}

pub fn qudit_fringe_observables(state: &QuditPureState, k: usize) -> Result<FringeObservables, StateError> {
    let m = state.subspace_moments(k)?;
    let level = m.norm_sq + m.m_pi;
    let visibility = if level > 0.0 { 2.0 * m.m_sigma.norm() / level } else { 0.0 };
    Ok(FringeObservables {
        phase_shift: if m.m_sigma.norm() > 0.0 { m.m_sigma.arg() } else { 0.0 },
        visibility,
        avg_intensity: 0.25 * level,
    })
}
