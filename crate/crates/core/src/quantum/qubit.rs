use std::f64::consts::PI;

use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use super::{DensityMatrix, StateError};
use crate::angle::wrap_phase;

/// Bloch-sphere parameters of a possibly mixed qubit.
///
/// `theta ∈ [0, π]` is the polar angle, `phi ∈ (-π, π]` the azimuth and
/// `mu ∈ [0, 1]` scales the transverse part of the Bloch vector.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawQubit")]
pub struct QubitState {
    theta: f64,
    phi: f64,
    mu: f64,
}

#[derive(Deserialize)]
struct RawQubit {
    theta: f64,
    phi: f64,
    #[serde(default = "one")]
    mu: f64,
}

fn one() -> f64 {
    1.0
}

impl TryFrom<RawQubit> for QubitState {
    type Error = StateError;
    fn try_from(raw: RawQubit) -> Result<Self, StateError> {
        QubitState::new(raw.theta, raw.phi, raw.mu)
    }
}

fn check_range(name: &'static str, value: f64, lo: f64, hi: f64) -> Result<(), StateError> {
    if !value.is_finite() {
        return Err(StateError::NonFinite(name));
    }
    if value < lo || value > hi {
        return Err(StateError::OutOfRange { name, value, lo, hi });
    }
    Ok(())
}

impl QubitState {
    /// Validates `theta` and `mu`; `phi` is wrapped into `(-π, π]`.
    pub fn new(theta: f64, phi: f64, mu: f64) -> Result<Self, StateError> {
        check_range("theta", theta, 0.0, PI)?;
        check_range("mu", mu, 0.0, 1.0)?;
        if !phi.is_finite() {
            return Err(StateError::NonFinite("phi"));
        }
        Ok(Self {
            theta,
            phi: wrap_phase(phi),
            mu,
        })
    }

    pub fn pure(theta: f64, phi: f64) -> Result<Self, StateError> {
        Self::new(theta, phi, 1.0)
    }

    /// Pure state from a (not necessarily normalised) two-component vector.
    /// The azimuth is set to zero when either component vanishes.
    pub fn from_amplitudes(a: Complex64, b: Complex64) -> Result<Self, StateError> {
        let norm = (a.norm_sqr() + b.norm_sqr()).sqrt();
        if norm == 0.0 || !norm.is_finite() {
            return Err(StateError::ZeroNorm);
        }
        let theta = 2.0 * (a.norm() / norm).min(1.0).acos();
        let phi = if a.norm() / norm < 1e-12 || b.norm() / norm < 1e-12 {
            0.0
        } else {
            b.arg() - a.arg()
        };
        Self::new(theta.clamp(0.0, PI), phi, 1.0)
    }

    pub fn theta(&self) -> f64 {
        self.theta
    }

    pub fn phi(&self) -> f64 {
        self.phi
    }

    pub fn mu(&self) -> f64 {
        self.mu
    }

    /// Bloch vector `(μ sinθ cosφ, μ sinθ sinφ, cosθ)`.
    pub fn bloch_vector(&self) -> [f64; 3] {
        let t = self.mu * self.theta.sin();
        [t * self.phi.cos(), t * self.phi.sin(), self.theta.cos()]
    }

    /// Bloch vector length `√(cos²θ + μ² sin²θ)`.
    pub fn bloch_length(&self) -> f64 {
        let (s, c) = self.theta.sin_cos();
        (c * c + self.mu * self.mu * s * s).sqrt()
    }

    /// State vector `(cos θ/2, e^{iφ} sin θ/2)`, ignoring `mu`.
    pub fn amplitudes(&self) -> [Complex64; 2] {
        let (s, c) = (self.theta / 2.0).sin_cos();
        [Complex64::new(c, 0.0), Complex64::from_polar(s, self.phi)]
    }

    pub fn density_matrix(&self) -> DensityMatrix {
        let (s_half, c_half) = (self.theta / 2.0).sin_cos();
        let off = 0.5 * self.mu * self.theta.sin();
        let lower = Complex64::from_polar(off, self.phi);
        let m = DMatrix::from_row_slice(
            2,
            2,
            &[
                Complex64::new(c_half * c_half, 0.0),
                lower.conj(),
                lower,
                Complex64::new(s_half * s_half, 0.0),
            ],
        );
        DensityMatrix::new(m).expect("valid qubit parameters give a valid density matrix")
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn density_matrix_examples() {
        let rho = QubitState::new(0.0, 0.0, 1.0).unwrap().density_matrix();
        assert_eq!(rho.get(0, 0).re, 1.0);
        assert!(rho.get(1, 1).norm() < 1e-16 && rho.get(0, 1).norm() < 1e-16);

        let rho = QubitState::new(PI / 2.0, 0.0, 0.0).unwrap().density_matrix();
        assert!((rho.get(0, 0).re - 0.5).abs() < 1e-15 && (rho.get(1, 1).re - 0.5).abs() < 1e-15);
        assert_eq!(rho.get(0, 1).norm(), 0.0);

        let rho = QubitState::new(PI / 2.0, PI / 2.0, 1.0).unwrap().density_matrix();
        assert!((rho.get(1, 0) - Complex64::new(0.0, 0.5)).norm() < 1e-15);
    }

    #[test]
    fn validation() {
        assert!(QubitState::new(-0.1, 0.0, 1.0).is_err());
        assert!(QubitState::new(0.1, 0.0, 1.01).is_err());
        assert!(QubitState::new(f64::NAN, 0.0, 1.0).is_err());
        let s = QubitState::new(1.0, -PI, 0.5).unwrap();
        assert_eq!(s.phi(), PI);
        assert!(serde_json::from_str::<QubitState>(r#"{"theta":4.0,"phi":0}"#).is_err());
        let s: QubitState = serde_json::from_str(r#"{"theta":1.0,"phi":0.5}"#).unwrap();
        assert_eq!(s.mu(), 1.0);
    }

    #[test]
    fn amplitudes_round_trip() {
        let s = QubitState::pure(1.1, -2.0).unwrap();
        let [a, b] = s.amplitudes();
        let back = QubitState::from_amplitudes(a * Complex64::from_polar(1.0, 0.7), b * Complex64::from_polar(1.0, 0.7)).unwrap();
        assert!((back.theta() - 1.1).abs() < 1e-12);
        assert!((back.phi() + 2.0).abs() < 1e-12);
    }

    proptest! {
        #[test]
        fn density_matrix_is_valid(theta in 0.0..=PI, phi in -PI..PI, mu in 0.0..=1.0f64) {
            let s = QubitState::new(theta, phi, mu).unwrap();
            let rho = s.density_matrix();
            let ev = rho.eigenvalues();
            prop_assert!(ev[1] >= -1e-10);
            prop_assert!((ev[0] + ev[1] - 1.0).abs() < 1e-12);
            prop_assert!((rho.get(0, 1).norm() - 0.5 * mu * theta.sin()).abs() < 1e-15);
        }
    }
}
