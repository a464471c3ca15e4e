use std::collections::BTreeSet;

use super::{ReconFlag, ReconstructError, ReconstructedState, ReconstructionResult, Sigmas};
use crate::fit::{EstimateFlag, FringeEstimate};
use crate::quantum::{entanglement_entropy, QubitState};

/// Below this `sin θ` the azimuth is treated as undefined.
pub(super) const POLE_SIN: f64 = 1e-3;

pub(super) fn check_estimate(est: &FringeEstimate) -> Result<(), ReconstructError> {
    if est.n_slices_used == 0 {
        return Err(ReconstructError::InvalidEstimate("no slices used"));
    }
    if est.has(EstimateFlag::Unnormalized) {
        return Err(ReconstructError::Unnormalized);
    }
    if !est.avg_intensity.is_finite() || !est.visibility.is_finite() {
        return Err(ReconstructError::InvalidEstimate("non-finite observable"));
    }
    if est.visibility < 0.0 {
        return Err(ReconstructError::InvalidEstimate("negative visibility"));
    }
    if !est.phase_shift.is_finite() && !est.has(EstimateFlag::PhaseIndeterminate) {
        return Err(ReconstructError::InvalidEstimate("non-finite phase"));
    }
    Ok(())
}

struct Polar {
    theta: f64,
    sigma_theta: f64,
    phi: f64,
    sigma_phi: f64,
    at_pole: bool,
    flags: BTreeSet<ReconFlag>,
}

/// `θ` from `Ī` and `φ` from `Φ`, shared by the mixed and pure inversions.
fn polar(est: &FringeEstimate) -> Result<Polar, ReconstructError> {
    check_estimate(est)?;
    let mut flags = BTreeSet::new();
    let avg = est.avg_intensity.clamp(0.25, 0.5);
    if avg != est.avg_intensity {
        flags.insert(ReconFlag::AvgIntensityClamped);
    }
    let cos_theta = (8.0 * avg - 3.0).clamp(-1.0, 1.0);
    let theta = cos_theta.acos();
    let sin_theta = theta.sin();
    let sigma_avg = 8.0 * est.avg_intensity_std.max(0.0);
    let at_pole = sin_theta < POLE_SIN;
    let (phi, sigma_phi, sigma_theta) = if at_pole {
        flags.insert(ReconFlag::PhaseIndeterminate);
        // near a pole δ(cos θ) ≈ θ δθ, so δθ ≈ √(2 δ(cos θ))
        (0.0, f64::INFINITY, (2.0 * sigma_avg).sqrt().max(sigma_avg / sin_theta.max(POLE_SIN)))
    } else if est.has(EstimateFlag::PhaseIndeterminate) {
        flags.insert(ReconFlag::PhaseIndeterminate);
        (0.0, f64::INFINITY, sigma_avg / sin_theta)
    } else {
        (est.phase_shift, est.phase_std.max(0.0), sigma_avg / sin_theta)
    };
    Ok(Polar {
        theta,
        sigma_theta,
        phi,
        sigma_phi,
        at_pole,
        flags,
    })
}

/// Mixed-qubit inversion of `(Φ, V, Ī)`.
///
/// `θ = arccos(8Ī − 3)`, `φ = Φ`, `μ = V(3 + cos θ)/(2 sin θ)` capped at 1.
/// At the poles `φ` and `μ` are unobservable and are reported as 0 and 1.
pub fn invert_qubit(est: &FringeEstimate) -> Result<ReconstructionResult, ReconstructError> {
    let Polar {
        theta,
        sigma_theta,
        phi,
        sigma_phi,
        at_pole,
        mut flags,
    } = polar(est)?;
    let (mu, sigma_mu) = if at_pole {
        (1.0, f64::INFINITY)
    } else {
        let (s, c) = theta.sin_cos();
        let v = est.visibility;
        let raw = v * (3.0 + c) / (2.0 * s);
        let d_v = (3.0 + c) / (2.0 * s);
        let d_theta = -v * (1.0 + 3.0 * c) / (2.0 * s * s);
        let sigma = (d_v * est.visibility_std).hypot(d_theta * sigma_theta);
        if raw > 1.0 {
            flags.insert(ReconFlag::MuClamped);
        }
        (raw.min(1.0), sigma)
    };
    finish(QubitState::new(theta, phi, mu)?, flags, [sigma_theta, sigma_phi, sigma_mu])
}

/// Pure-state inversion: `θ` from `Ī`, `φ` from `Φ`, `μ = 1`; the
/// visibility is not used.
pub fn reconstruct_pure_assumed(est: &FringeEstimate) -> Result<ReconstructionResult, ReconstructError> {
    let p = polar(est)?;
    finish(QubitState::pure(p.theta, p.phi)?, p.flags, [p.sigma_theta, p.sigma_phi, 0.0])
}

fn finish(state: QubitState, flags: BTreeSet<ReconFlag>, [theta, phi, mu]: [f64; 3]) -> Result<ReconstructionResult, ReconstructError> {
    Ok(ReconstructionResult {
        rho: state.density_matrix(),
        state: ReconstructedState::Qubit(state),
        flags,
        sigmas: Sigmas::Qubit { theta, phi, mu },
        fidelity_vs_target: None,
    })
}

/// Entanglement entropy (bits) of a pure two-qubit state from the fringe
/// observables of one of its qubits.
pub fn entanglement_from_marginal(est: &FringeEstimate) -> Result<f64, ReconstructError> {
    let r = invert_qubit(est)?;
    Ok(entanglement_entropy(r.qubit().expect("qubit inversion")))
}
