use nalgebra::DMatrix;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Binomial, Distribution};
use serde::{Deserialize, Serialize};

use super::BenchError;
use crate::quantum::{DensityMatrix, QubitState};
use crate::Complex64;

/// A photon budget split evenly across measurement settings.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "RawBudget")]
pub struct ShotBudget {
    total_shots: u64,
    settings: u32,
}

#[derive(Deserialize)]
struct RawBudget {
    total_shots: u64,
    settings: u32,
}

impl TryFrom<RawBudget> for ShotBudget {
    type Error = BenchError;

    fn try_from(r: RawBudget) -> Result<Self, BenchError> {
        ShotBudget::new(r.total_shots, r.settings)
    }
}

impl ShotBudget {
    pub fn new(total_shots: u64, settings: u32) -> Result<Self, BenchError> {
        if settings == 0 || total_shots < u64::from(settings) {
            return Err(BenchError::Budget {
                total: total_shots,
                settings,
            });
        }
        Ok(Self { total_shots, settings })
    }

    /// Pauli tomography: σx, σy, σz.
    pub fn qst(total_shots: u64) -> Result<Self, BenchError> {
        Self::new(total_shots, 3)
    }

    /// A single interferogram.
    pub fn qsi(total_shots: u64) -> Result<Self, BenchError> {
        Self::new(total_shots, 1)
    }

    pub fn total_shots(&self) -> u64 {
        self.total_shots
    }

    pub fn settings(&self) -> u32 {
        self.settings
    }

    pub fn per_setting(&self) -> u64 {
        self.total_shots / u64::from(self.settings)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct QstEstimate {
    pub rho: DensityMatrix,
    /// Bloch vector after any rescaling.
    pub bloch: [f64; 3],
    /// The raw Bloch vector was longer than 1 and was scaled to unit length.
    pub rescaled: bool,
}

/// `ρ = ½(I + r·σ)`, with `r` scaled back onto the sphere when `|r| > 1`.
pub fn linear_inversion(bloch: [f64; 3]) -> QstEstimate {
    let len = bloch.iter().map(|v| v * v).sum::<f64>().sqrt();
    let rescaled = len > 1.0;
    let [x, y, z] = if rescaled { bloch.map(|v| v / len) } else { bloch };
    let m = DMatrix::from_row_slice(
        2,
        2,
        &[
            Complex64::new(0.5 * (1.0 + z), 0.0),
            Complex64::new(0.5 * x, -0.5 * y),
            Complex64::new(0.5 * x, 0.5 * y),
            Complex64::new(0.5 * (1.0 - z), 0.0),
        ],
    );
    QstEstimate {
        rho: DensityMatrix::new(m).expect("Bloch vector inside the unit ball"),
        bloch: [x, y, z],
        rescaled,
    }
}

/// Simulates ±1 outcomes of σx, σy and σz with `budget.per_setting()`
/// shots each and inverts the observed frequencies.
pub fn simulate_qst(state: &QubitState, budget: &ShotBudget, seed: u64) -> Result<QstEstimate, BenchError> {
    let n = budget.per_setting();
    if n == 0 {
        return Err(BenchError::Budget {
            total: budget.total_shots(),
            settings: budget.settings(),
        });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let r = state.bloch_vector();
    let mut est = [0.0; 3];
    for (e, &ri) in est.iter_mut().zip(&r) {
        let p_plus = (0.5 * (1.0 + ri)).clamp(0.0, 1.0);
        let plus = Binomial::new(n, p_plus).expect("probability in [0, 1]").sample(&mut rng);
        *e = 2.0 * plus as f64 / n as f64 - 1.0;
    }
    Ok(linear_inversion(est))
}
