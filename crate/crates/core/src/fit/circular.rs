//! Circular statistics on phases.

use num_complex::Complex64;

/// Resultant `Σ e^{iθ}/n`.
fn mean_resultant(angles: &[f64]) -> Option<Complex64> {
    if angles.is_empty() {
        return None;
    }
    let sum: Complex64 = angles.iter().map(|&a| Complex64::from_polar(1.0, a)).sum();
    Some(sum / angles.len() as f64)
}

/// Mean resultant length `R̄ ∈ [0, 1]`.
pub fn mean_resultant_length(angles: &[f64]) -> f64 {
    mean_resultant(angles).map_or(0.0, |z| z.norm().min(1.0))
}

/// Mean direction `arg Σ e^{iθ}`; `None` for an empty or balanced sample.
pub fn circular_mean(angles: &[f64]) -> Option<f64> {
    let z = mean_resultant(angles)?;
    (z.norm() > 1e-12).then(|| z.arg())
}

/// Circular standard deviation `√(−2 ln R̄)`.
pub fn circular_std(angles: &[f64]) -> f64 {
    let r = mean_resultant_length(angles);
    if r <= 0.0 {
        f64::INFINITY
    } else {
        (-2.0 * r.ln()).max(0.0).sqrt()
    }
}
