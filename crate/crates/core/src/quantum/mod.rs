//! State representations, operators and metrics.
//!
//! Conventions used throughout the crate:
//!
//! - `|0⟩` is horizontal polarisation, `|1⟩` is vertical.
//! - `σ₋ = |0⟩⟨1|`, so that `Tr(ρ σ₋) = ½ μ e^{iφ} sin θ` and `Π₀ σₓ = σ₋`.
//! - Fidelity is the squared (probability) form; for a pure target it is
//!   `⟨ψ|ρ|ψ⟩`.
//! - Entropies are in bits.

mod density;
mod metrics;
mod operator;
mod qubit;
mod qudit;

pub use density::DensityMatrix;
pub use metrics::{binary_entropy, entanglement_entropy, fidelity, pure_fidelity};
pub use operator::{expect, Operator2, OperatorRole};
pub use qubit::QubitState;
pub use qudit::{QuditPureState, SubspaceMoments};

use thiserror::Error;

/// Absolute tolerance for Hermiticity and unit trace.
pub const HERMITIAN_TOL: f64 = 1e-12;
/// Smallest eigenvalue still accepted as positive semidefinite.
pub const PSD_TOL: f64 = 1e-10;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum StateError {
    #[error("{name} = {value} outside [{lo}, {hi}]")]
    OutOfRange {
        name: &'static str,
        value: f64,
        lo: f64,
        hi: f64,
    },
    #[error("non-finite parameter {0}")]
    NonFinite(&'static str),
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("matrix is not Hermitian (max deviation {0:e})")]
    NotHermitian(f64),
    #[error("trace {0} differs from 1")]
    BadTrace(f64),
    #[error("negative eigenvalue {0:e}")]
    NotPositive(f64),
    #[error("qudit dimension must be at least 2, found {0}")]
    BadDimension(usize),
    #[error("subspace index {k} out of range 1..={max}")]
    SubspaceIndex { k: usize, max: usize },
    #[error("zero-norm state vector")]
    ZeroNorm,
}
