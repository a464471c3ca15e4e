use nalgebra::DMatrix;
use num_complex::Complex64;

use super::{DensityMatrix, QubitState, StateError};

/// Purity above which a density matrix is treated as a projector.
const PURE_TOL: f64 = 1e-12;

/// Squared Uhlmann fidelity `(Tr √(√ρ σ √ρ))²`. When either argument is pure
/// this reduces to `⟨ψ|ρ|ψ⟩`, which is what is evaluated in that case.
pub fn fidelity(rho: &DensityMatrix, target: &DensityMatrix) -> Result<f64, StateError> {
    if rho.dim() != target.dim() {
        return Err(StateError::DimensionMismatch {
            expected: target.dim(),
            found: rho.dim(),
        });
    }
    let f = if (target.purity() - 1.0).abs() < PURE_TOL || (rho.purity() - 1.0).abs() < PURE_TOL {
        // Tr(ρσ) is exact when one side is a projector
        let prod = rho.entries() * target.entries();
        prod.trace().re
    } else {
        let sqrt_rho = psd_sqrt(rho.entries());
        let inner = &sqrt_rho * target.entries() * &sqrt_rho;
        let inner = hermitise(inner);
        let root_trace: f64 = inner
            .symmetric_eigenvalues()
            .iter()
            .map(|&l| l.max(0.0).sqrt())
            .sum();
        root_trace * root_trace
    };
    Ok(f.clamp(0.0, 1.0))
}

/// `|⟨ψ|φ⟩|²` for normalised vectors.
pub fn pure_fidelity(a: &[Complex64], b: &[Complex64]) -> Result<f64, StateError> {
    if a.len() != b.len() {
        return Err(StateError::DimensionMismatch {
            expected: b.len(),
            found: a.len(),
        });
    }
    let na: f64 = a.iter().map(|z| z.norm_sqr()).sum();
    let nb: f64 = b.iter().map(|z| z.norm_sqr()).sum();
    if na == 0.0 || nb == 0.0 {
        return Err(StateError::ZeroNorm);
    }
    let overlap: Complex64 = a.iter().zip(b).map(|(x, y)| x.conj() * y).sum();
    Ok((overlap.norm_sqr() / (na * nb)).clamp(0.0, 1.0))
}

fn hermitise(m: DMatrix<Complex64>) -> DMatrix<Complex64> {
    let adj = m.adjoint();
    (m + adj) * Complex64::new(0.5, 0.0)
}

fn psd_sqrt(m: &DMatrix<Complex64>) -> DMatrix<Complex64> {
    let eig = m.clone().symmetric_eigen();
    let roots = eig.eigenvalues.map(|l| Complex64::new(l.max(0.0).sqrt(), 0.0));
    let v = &eig.eigenvectors;
    v * DMatrix::from_diagonal(&roots) * v.adjoint()
}

/// Shannon entropy in bits of the distribution `(p, 1 - p)`.
pub fn binary_entropy(p: f64) -> f64 {
    let h = |x: f64| if x <= 0.0 { 0.0 } else { -x * x.log2() };
    h(p) + h(1.0 - p)
}

/// Entanglement entropy (bits) of a pure bipartite state given its qubit
/// marginal. The marginal eigenvalues are `(1 ± r)/2` with `r` the Bloch length.
pub fn entanglement_entropy(reduced: &QubitState) -> f64 {
    let r = reduced.bloch_length().min(1.0);
    binary_entropy(0.5 * (1.0 + r)).clamp(0.0, 1.0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use std::f64::consts::PI;

    fn diag(a: f64, b: f64) -> DensityMatrix {
        DensityMatrix::new(DMatrix::from_row_slice(
            2,
            2,
            &[Complex64::new(a, 0.0), Complex64::default(), Complex64::default(), Complex64::new(b, 0.0)],
        ))
        .unwrap()
    }

    #[test]
    fn fidelity_examples() {
        let psi = QubitState::pure(1.0, 0.4).unwrap().density_matrix();
        assert!((fidelity(&psi, &psi).unwrap() - 1.0).abs() < 1e-12);
        assert_eq!(fidelity(&diag(1.0, 0.0), &diag(0.0, 1.0)).unwrap(), 0.0);
        assert!((fidelity(&diag(0.5, 0.5), &diag(1.0, 0.0)).unwrap() - 0.5).abs() < 1e-15);
    }

    #[test]
    fn mixed_fidelity_matches_two_level_closed_form() {
        // for qubits F = Tr(ρσ) + 2√(det ρ det σ)
        let a = QubitState::new(1.0, 0.3, 0.6).unwrap().density_matrix();
        let b = QubitState::new(2.0, -1.0, 0.4).unwrap().density_matrix();
        let det = |m: &DensityMatrix| (m.get(0, 0) * m.get(1, 1) - m.get(0, 1) * m.get(1, 0)).re;
        let closed = (a.entries() * b.entries()).trace().re + 2.0 * (det(&a) * det(&b)).sqrt();
        assert!((fidelity(&a, &b).unwrap() - closed).abs() < 1e-12);
        assert!((fidelity(&b, &a).unwrap() - closed).abs() < 1e-12);
    }

    #[test]
    fn fidelity_dimension_mismatch() {
        let q = DensityMatrix::from_pure(&[Complex64::new(1.0, 0.0), Complex64::default(), Complex64::default()]).unwrap();
        assert!(fidelity(&q, &diag(1.0, 0.0)).is_err());
    }

    #[test]
    fn entropy_examples() {
        assert!((entanglement_entropy(&QubitState::new(PI / 2.0, 0.0, 0.0).unwrap()) - 1.0).abs() < 1e-15);
        assert_eq!(entanglement_entropy(&QubitState::new(0.0, 0.0, 0.3).unwrap()), 0.0);
        let e = entanglement_entropy(&QubitState::new(PI / 2.0, 0.0, 0.6).unwrap());
        // oracle: eigenvalues of diag-free ρ with off-diagonal 0.3 are 0.8 and 0.2
        let oracle = -(0.8f64 * 0.8f64.log2() + 0.2 * 0.2f64.log2());
        assert!((e - oracle).abs() < 1e-12);
        assert!((e - 0.721_928).abs() < 1e-5);
    }

    proptest! {
        #[test]
        fn entropy_bounds(theta in 0.0..=PI, phi in -PI..PI, mu in 0.0..=1.0f64) {
            let s = QubitState::new(theta, phi, mu).unwrap();
            let e = entanglement_entropy(&s);
            prop_assert!((0.0..=1.0).contains(&e));
            // matches the eigenvalues of the density matrix
            let ev = s.density_matrix().eigenvalues();
            let oracle: f64 = ev.iter().map(|&l| if l > 0.0 { -l * l.log2() } else { 0.0 }).sum();
            prop_assert!((e - oracle).abs() < 1e-7);
        }
    }

    #[test]
    fn entropy_extremes_only_at_extreme_lengths() {
        for &(theta, mu) in &[(0.3, 1.0), (2.0, 1.0), (PI / 2.0, 1.0)] {
            assert!(entanglement_entropy(&QubitState::new(theta, 0.0, mu).unwrap()) < 1e-9);
        }
        assert!(entanglement_entropy(&QubitState::new(PI / 2.0 - 0.01, 0.0, 0.0).unwrap()) < 1.0);
        assert!(entanglement_entropy(&QubitState::new(PI / 2.0, 0.0, 0.999).unwrap()) > 0.0);
    }
}
