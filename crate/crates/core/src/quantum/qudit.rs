use std::f64::consts::PI;

use num_complex::Complex64;
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use super::StateError;
use crate::angle::wrap_phase;

/// Pure qudit in polar-spherical form.
///
/// Amplitude `k` (1-based) is `Π_{j<k} sin(θ_j/2) e^{iφ_j} · cos(θ_k/2)`; the
/// last amplitude omits the cosine.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawQudit", into = "RawQudit")]
pub struct QuditPureState {
    thetas: Vec<f64>,
    phis: Vec<f64>,
}

#[derive(Serialize, Deserialize)]
struct RawQudit {
    dim: usize,
    thetas: Vec<f64>,
    phis: Vec<f64>,
}

impl TryFrom<RawQudit> for QuditPureState {
    type Error = StateError;
    fn try_from(raw: RawQudit) -> Result<Self, StateError> {
        if raw.thetas.len() + 1 != raw.dim {
            return Err(StateError::DimensionMismatch {
                expected: raw.dim.saturating_sub(1),
                found: raw.thetas.len(),
            });
        }
        QuditPureState::new(raw.thetas, raw.phis)
    }
}

impl From<QuditPureState> for RawQudit {
    fn from(s: QuditPureState) -> Self {
        RawQudit {
            dim: s.dim(),
            thetas: s.thetas,
            phis: s.phis,
        }
    }
}

/// Two-level moments of the `{k, k+1}` subspace.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SubspaceMoments {
    /// `⟨ψ_k|σ₋|ψ_k⟩`
    pub m_sigma: Complex64,
    /// `⟨ψ_k|Π₀|ψ_k⟩`
    pub m_pi: f64,
    /// `⟨ψ_k|ψ_k⟩`
    pub norm_sq: f64,
}

impl QuditPureState {
    pub fn new(thetas: Vec<f64>, phis: Vec<f64>) -> Result<Self, StateError> {
        if thetas.is_empty() {
            return Err(StateError::BadDimension(thetas.len() + 1));
        }
        if phis.len() != thetas.len() {
            return Err(StateError::DimensionMismatch {
                expected: thetas.len(),
                found: phis.len(),
            });
        }
        for &t in &thetas {
            if !t.is_finite() {
                return Err(StateError::NonFinite("theta"));
            }
            if !(0.0..=PI).contains(&t) {
                return Err(StateError::OutOfRange {
                    name: "theta",
                    value: t,
                    lo: 0.0,
                    hi: PI,
                });
            }
        }
        if phis.iter().any(|p| !p.is_finite()) {
            return Err(StateError::NonFinite("phi"));
        }
        let phis = phis.into_iter().map(wrap_phase).collect();
        Ok(Self { thetas, phis })
    }

    /// Converts amplitudes to angles, quotienting the global phase.
    pub fn from_amplitudes(amps: &[Complex64]) -> Result<Self, StateError> {
        let d = amps.len();
        if d < 2 {
            return Err(StateError::BadDimension(d));
        }
        let norm: f64 = amps.iter().map(|a| a.norm_sqr()).sum::<f64>().sqrt();
        if norm == 0.0 || !norm.is_finite() {
            return Err(StateError::ZeroNorm);
        }
        let mut tail_sq: Vec<f64> = vec![0.0; d + 1];
        for k in (0..d).rev() {
            tail_sq[k] = tail_sq[k + 1] + amps[k].norm_sqr() / (norm * norm);
        }
        let negligible = 1e-13;
        let mut thetas = Vec::with_capacity(d - 1);
        let mut phis = Vec::with_capacity(d - 1);
        let mut cumulative = if amps[0].norm() / norm > negligible { amps[0].arg() } else { 0.0 };
        for k in 0..d - 1 {
            let tail = tail_sq[k].sqrt();
            let theta = if tail > negligible {
                2.0 * (amps[k].norm() / norm / tail).min(1.0).acos()
            } else {
                0.0
            };
            thetas.push(theta.clamp(0.0, PI));
            let phi = if amps[k + 1].norm() / norm > negligible {
                let p = wrap_phase(amps[k + 1].arg() - cumulative);
                cumulative = amps[k + 1].arg();
                p
            } else {
                0.0
            };
            phis.push(phi);
        }
        Self::new(thetas, phis)
    }

    /// Haar-random pure state.
    pub fn random<R: Rng + ?Sized>(dim: usize, rng: &mut R) -> Result<Self, StateError> {
        let amps: Vec<Complex64> = (0..dim)
            .map(|_| Complex64::new(rng.sample(StandardNormal), rng.sample(StandardNormal)))
            .collect();
        Self::from_amplitudes(&amps)
    }

    pub fn dim(&self) -> usize {
        self.thetas.len() + 1
    }

    pub fn thetas(&self) -> &[f64] {
        &self.thetas
    }

    pub fn phis(&self) -> &[f64] {
        &self.phis
    }

    pub fn amplitudes(&self) -> Vec<Complex64> {
        let d = self.dim();
        let mut out = Vec::with_capacity(d);
        let mut prefix = Complex64::new(1.0, 0.0);
        for k in 0..d - 1 {
            let (s, c) = (self.thetas[k] / 2.0).sin_cos();
            out.push(prefix * c);
            prefix *= Complex64::from_polar(s, self.phis[k]);
        }
        out.push(prefix);
        out
    }

    fn check_subspace(&self, k: usize) -> Result<(), StateError> {
        if k == 0 || k >= self.dim() {
            return Err(StateError::SubspaceIndex { k, max: self.dim() - 1 });
        }
        Ok(())
    }

    /// Weight `ξ(k) = Π_{j<k} sin²(θ_j/2)` of subspace `k` (1-based).
    pub fn subspace_weight(&self, k: usize) -> Result<f64, StateError> {
        self.check_subspace(k)?;
        Ok(self.thetas[..k - 1].iter().map(|t| (t / 2.0).sin().powi(2)).product())
    }

    /// Moments of subspace `k ∈ 1..=d-1`.
    pub fn subspace_moments(&self, k: usize) -> Result<SubspaceMoments, StateError> {
        let xi = self.subspace_weight(k)?;
        let theta_k = self.thetas[k - 1];
        let cos_next = if k < self.dim() - 1 { (self.thetas[k] / 2.0).cos() } else { 1.0 };
        let (s_half, c_half) = (theta_k / 2.0).sin_cos();
        let m_sigma = Complex64::from_polar(xi * 0.5 * theta_k.sin() * cos_next, self.phis[k - 1]);
        let m_pi = xi * c_half * c_half;
        let norm_sq = xi * (c_half * c_half + s_half * s_half * cos_next * cos_next);
        Ok(SubspaceMoments { m_sigma, m_pi, norm_sq })
    }
}
