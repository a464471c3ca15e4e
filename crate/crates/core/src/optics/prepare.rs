use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::angle::wrap_half_turn;
use crate::quantum::{Operator2, QubitState};

/// Waveplate orientations used to prepare the input polarisation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PreparationSetting {
    /// HWP fast-axis angle, radians in `[0, π)`.
    pub alpha: f64,
    /// QWP fast-axis angle, radians in `[0, π)`; ignored without a QWP.
    pub beta: f64,
    pub qwp_present: bool,
}

impl PreparationSetting {
    pub fn new(alpha: f64, beta: f64) -> Self {
        Self {
            alpha: wrap_half_turn(alpha),
            beta: wrap_half_turn(beta),
            qwp_present: true,
        }
    }

    pub fn hwp_only(alpha: f64) -> Self {
        Self {
            alpha: wrap_half_turn(alpha),
            beta: 0.0,
            qwp_present: false,
        }
    }
}

/// Jones vector after HWP(α) and then QWP(β) act on vertical polarisation.
pub fn prepare_jones_vector(setting: &PreparationSetting) -> [Complex64; 2] {
    let vertical = [Complex64::new(0.0, 0.0), Complex64::new(1.0, 0.0)];
    let after_hwp = Operator2::hwp(setting.alpha).apply(vertical);
    if setting.qwp_present {
        Operator2::qwp(setting.beta).apply(after_hwp)
    } else {
        after_hwp
    }
}

/// The pure qubit state prepared by `setting` (`|0⟩ = H`, `|1⟩ = V`).
pub fn prepare_qubit(setting: &PreparationSetting) -> QubitState {
    let [h, v] = prepare_jones_vector(setting);
    QubitState::from_amplitudes(h, v).expect("waveplates preserve the norm")
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::Matrix2;
    use std::f64::consts::PI;

    fn rot(a: f64) -> Matrix2<Complex64> {
        let (s, c) = a.sin_cos();
        Matrix2::new(c, s, -s, c).map(|x| Complex64::new(x, 0.0))
    }

    /// Independent Jones route: rotate into the plate frame, retard, rotate back.
    fn oracle_density(alpha: f64, beta: Option<f64>) -> Matrix2<Complex64> {
        let one = Complex64::new(1.0, 0.0);
        let hwp = rot(-alpha) * Matrix2::new(one, 0.0.into(), 0.0.into(), -one) * rot(alpha);
        let mut j = hwp;
        if let Some(b) = beta {
            let qwp = rot(-b) * Matrix2::new(one, 0.0.into(), 0.0.into(), Complex64::i()) * rot(b);
            j = qwp * j;
        }
        let v = j * nalgebra::Vector2::new(Complex64::new(0.0, 0.0), one);
        v * v.adjoint()
    }

    fn assert_matches_oracle(setting: PreparationSetting) {
        let rho = prepare_qubit(&setting).density_matrix();
        let beta = setting.qwp_present.then_some(setting.beta);
        let oracle = oracle_density(setting.alpha, beta);
        for i in 0..2 {
            for j in 0..2 {
                assert!(
                    (rho.get(i, j) - oracle[(i, j)]).norm() < 1e-12,
                    "mismatch at {setting:?}"
                );
            }
        }
    }

    #[test]
    fn vertical_input_without_plates_rotation() {
        let s = prepare_qubit(&PreparationSetting::hwp_only(0.0));
        assert!((s.theta() - PI).abs() < 1e-12);
        let s = prepare_qubit(&PreparationSetting::hwp_only(PI / 8.0));
        assert!((s.theta() - PI / 2.0).abs() < 1e-12);
        let s = prepare_qubit(&PreparationSetting::hwp_only(PI / 4.0));
        assert!(s.theta().abs() < 1e-7);
    }

    #[test]
    fn ten_degree_grid_matches_rotation_oracle() {
        for a in 0..18 {
            for b in 0..18 {
                let (alpha, beta) = ((a * 10) as f64 * PI / 180.0, (b * 10) as f64 * PI / 180.0);
                assert_matches_oracle(PreparationSetting::new(alpha, beta));
            }
            assert_matches_oracle(PreparationSetting::hwp_only((a * 10) as f64 * PI / 180.0));
        }
    }

    #[test]
    fn circular_polarisation() {
        // QWP at 45° on horizontal light gives a pole of the equator in y
        let s = prepare_qubit(&PreparationSetting::new(PI / 4.0, PI / 4.0));
        assert!((s.theta() - PI / 2.0).abs() < 1e-9);
        assert!((s.phi().abs() - PI / 2.0).abs() < 1e-9);
    }
}
