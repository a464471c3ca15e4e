use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use super::{StateError, HERMITIAN_TOL, PSD_TOL};

/// A validated `d × d` density matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct DensityMatrix {
    entries: DMatrix<Complex64>,
}

impl DensityMatrix {
    /// Validates Hermiticity, unit trace and positivity.
    pub fn new(entries: DMatrix<Complex64>) -> Result<Self, StateError> {
        let dim = entries.nrows();
        if dim == 0 || entries.ncols() != dim {
            return Err(StateError::DimensionMismatch {
                expected: dim.max(1),
                found: entries.ncols(),
            });
        }
        if entries.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
            return Err(StateError::NonFinite("density matrix entry"));
        }
        let mut worst = 0.0f64;
        for i in 0..dim {
            for j in 0..dim {
                worst = worst.max((entries[(i, j)] - entries[(j, i)].conj()).norm());
            }
        }
        if worst > HERMITIAN_TOL {
            return Err(StateError::NotHermitian(worst));
        }
        let trace = entries.trace();
        if (trace.re - 1.0).abs() > HERMITIAN_TOL || trace.im.abs() > HERMITIAN_TOL {
            return Err(StateError::BadTrace(trace.re));
        }
        let min_eig = entries
            .clone()
            .symmetric_eigenvalues()
            .iter()
            .cloned()
            .fold(f64::INFINITY, f64::min);
        if min_eig < -PSD_TOL {
            return Err(StateError::NotPositive(min_eig));
        }
        Ok(Self { entries })
    }

    /// `|ψ⟩⟨ψ|` for a normalised (or normalisable) state vector.
    pub fn from_pure(amplitudes: &[Complex64]) -> Result<Self, StateError> {
        let norm: f64 = amplitudes.iter().map(|a| a.norm_sqr()).sum::<f64>().sqrt();
        if norm == 0.0 || !norm.is_finite() {
            return Err(StateError::ZeroNorm);
        }
        let d = amplitudes.len();
        let psi: Vec<Complex64> = amplitudes.iter().map(|a| a / norm).collect();
        let mut m = DMatrix::from_fn(d, d, |i, j| psi[i] * psi[j].conj());
        // exact Hermiticity
        for i in 0..d {
            m[(i, i)].im = 0.0;
            for j in 0..i {
                m[(j, i)] = m[(i, j)].conj();
            }
        }
        Self::new(m)
    }

    pub fn dim(&self) -> usize {
        self.entries.nrows()
    }

    pub fn entries(&self) -> &DMatrix<Complex64> {
        &self.entries
    }

    pub fn get(&self, row: usize, col: usize) -> Complex64 {
        self.entries[(row, col)]
    }

    /// `Tr(ρ²)`.
    pub fn purity(&self) -> f64 {
        self.entries.iter().map(|z| z.norm_sqr()).sum()
    }

    pub fn eigenvalues(&self) -> Vec<f64> {
        let mut ev: Vec<f64> = self.entries.clone().symmetric_eigenvalues().iter().cloned().collect();
        ev.sort_by(|a, b| b.total_cmp(a));
        ev
    }
}

#[derive(Serialize, Deserialize)]
struct DensityMatrixJson {
    dim: usize,
    re: Vec<Vec<f64>>,
    im: Vec<Vec<f64>>,
}

impl Serialize for DensityMatrix {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        let d = self.dim();
        let rows = |f: fn(&Complex64) -> f64| -> Vec<Vec<f64>> {
            (0..d)
                .map(|i| (0..d).map(|j| f(&self.entries[(i, j)])).collect())
                .collect()
        };
        DensityMatrixJson {
            dim: d,
            re: rows(|z| z.re),
            im: rows(|z| z.im),
        }
        .serialize(serializer)
    }
}

impl<'de> Deserialize<'de> for DensityMatrix {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        use serde::de::Error;
        let raw = DensityMatrixJson::deserialize(deserializer)?;
        let d = raw.dim;
        if raw.re.len() != d || raw.im.len() != d || raw.re.iter().chain(&raw.im).any(|r| r.len() != d) {
            return Err(D::Error::custom(format!("density matrix rows do not match dim {d}")));
        }
        let m = DMatrix::from_fn(d, d, |i, j| Complex64::new(raw.re[i][j], raw.im[i][j]));
        DensityMatrix::new(m).map_err(D::Error::custom)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    #[test]
    fn rejects_non_hermitian() {
        let m = DMatrix::from_row_slice(2, 2, &[c(0.5, 0.0), c(0.1, 0.0), c(0.2, 0.0), c(0.5, 0.0)]);
        assert!(matches!(DensityMatrix::new(m), Err(StateError::NotHermitian(_))));
    }

    #[test]
    fn rejects_bad_trace_and_negative() {
        let m = DMatrix::from_row_slice(2, 2, &[c(0.6, 0.0), c(0.0, 0.0), c(0.0, 0.0), c(0.6, 0.0)]);
        assert!(matches!(DensityMatrix::new(m), Err(StateError::BadTrace(_))));
        let m = DMatrix::from_row_slice(2, 2, &[c(1.2, 0.0), c(0.0, 0.0), c(0.0, 0.0), c(-0.2, 0.0)]);
        assert!(matches!(DensityMatrix::new(m), Err(StateError::NotPositive(_))));
    }

    #[test]
    fn pure_state_has_unit_purity() {
        let s = 0.5f64.sqrt();
        let rho = DensityMatrix::from_pure(&[c(s, 0.0), c(0.0, s)]).unwrap();
        assert!((rho.purity() - 1.0).abs() < 1e-14);
        assert!((rho.get(1, 0) - c(0.0, 0.5)).norm() < 1e-15);
    }

    #[test]
    fn json_round_trip() {
        let s = 0.5f64.sqrt();
        let rho = DensityMatrix::from_pure(&[c(s, 0.0), c(0.0, s)]).unwrap();
        let text = serde_json::to_string(&rho).unwrap();
        assert!(text.starts_with("{\"dim\":2,\"re\":[["));
        let back: DensityMatrix = serde_json::from_str(&text).unwrap();
        assert_eq!(back, rho);
        let bad = r#"{"dim":2,"re":[[1,0],[0,1]],"im":[[0,0],[0,0]]}"#;
        assert!(serde_json::from_str::<DensityMatrix>(bad).is_err());
    }
}
