use nalgebra::Matrix2;
use num_complex::Complex64;

use super::{DensityMatrix, StateError};

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum OperatorRole {
    SigmaMinus,
    SigmaPlus,
    Pi0,
    SigmaX,
    /// Half-wave plate with fast axis at the given angle.
    Hwp(f64),
    /// Quarter-wave plate with fast axis at the given angle.
    Qwp(f64),
    Custom,
}

/// A 2×2 operator (or Jones matrix) with a role tag.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Operator2 {
    pub entries: Matrix2<Complex64>,
    pub role: OperatorRole,
}

const ZERO: Complex64 = Complex64::new(0.0, 0.0);
const ONE: Complex64 = Complex64::new(1.0, 0.0);

impl Operator2 {
    /// `|0⟩⟨1|`.
    pub fn sigma_minus() -> Self {
        Self {
            entries: Matrix2::new(ZERO, ONE, ZERO, ZERO),
            role: OperatorRole::SigmaMinus,
        }
    }

    /// `|1⟩⟨0|`, the adjoint of [`Operator2::sigma_minus`].
    pub fn sigma_plus() -> Self {
        Self {
            entries: Matrix2::new(ZERO, ZERO, ONE, ZERO),
            role: OperatorRole::SigmaPlus,
        }
    }

    /// Projector onto `|0⟩` (the transmitting port of a PBS).
    pub fn pi0() -> Self {
        Self {
            entries: Matrix2::new(ONE, ZERO, ZERO, ZERO),
            role: OperatorRole::Pi0,
        }
    }

    pub fn sigma_x() -> Self {
        Self {
            entries: Matrix2::new(ZERO, ONE, ONE, ZERO),
            role: OperatorRole::SigmaX,
        }
    }

    /// Jones matrix of an ideal half-wave plate, global phase dropped.
    pub fn hwp(angle: f64) -> Self {
        let (s, c) = (2.0 * angle).sin_cos();
        Self {
            entries: Matrix2::new(
                Complex64::new(c, 0.0),
                Complex64::new(s, 0.0),
                Complex64::new(s, 0.0),
                Complex64::new(-c, 0.0),
            ),
            role: OperatorRole::Hwp(angle),
        }
    }

    /// Jones matrix of an ideal quarter-wave plate, `R(-β)·diag(1, i)·R(β)`.
    pub fn qwp(angle: f64) -> Self {
        let (s, c) = angle.sin_cos();
        let off = Complex64::new(s * c, -s * c);
        Self {
            entries: Matrix2::new(
                Complex64::new(c * c, s * s),
                off,
                off,
                Complex64::new(s * s, c * c),
            ),
            role: OperatorRole::Qwp(angle),
        }
    }

    pub fn custom(entries: Matrix2<Complex64>) -> Self {
        Self {
            entries,
            role: OperatorRole::Custom,
        }
    }

    /// Matrix product `self · rhs`, tagged as custom.
    pub fn then_after(&self, rhs: &Operator2) -> Operator2 {
        Operator2::custom(self.entries * rhs.entries)
    }

    pub fn apply(&self, v: [Complex64; 2]) -> [Complex64; 2] {
        let m = &self.entries;
        [
            m[(0, 0)] * v[0] + m[(0, 1)] * v[1],
            m[(1, 0)] * v[0] + m[(1, 1)] * v[1],
        ]
    }
}

/// `Tr(ρ · op)` for a qubit density matrix.
pub fn expect(op: &Operator2, rho: &DensityMatrix) -> Result<Complex64, StateError> {
    if rho.dim() != 2 {
        return Err(StateError::DimensionMismatch {
            expected: 2,
            found: rho.dim(),
        });
    }
    let mut acc = ZERO;
    for i in 0..2 {
        for j in 0..2 {
            acc += rho.get(i, j) * op.entries[(j, i)];
        }
    }
    Ok(acc)
}
