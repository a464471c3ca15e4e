//! Inversion of fringe observables into states.

mod qubit;
mod qudit;

pub use qubit::{entanglement_from_marginal, invert_qubit, reconstruct_pure_assumed};
pub use qudit::{invert_qudit, invert_qudit_moments, QuditInput};

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::quantum::{fidelity, DensityMatrix, QubitState, QuditPureState, StateError};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ReconstructError {
    #[error("estimate is unusable: {0}")]
    InvalidEstimate(&'static str),
    #[error("estimate is not normalised; calibrate the average intensity first")]
    Unnormalized,
    #[error("expected {expected} estimates for a qudit of dimension {dim}, got {found}")]
    EstimateCount { dim: usize, expected: usize, found: usize },
    #[error("qudit chain is ill-conditioned at subspace {k}: sin θ_{k} ≈ 0 with weight left downstream")]
    IllConditioned { k: usize },
    #[error(transparent)]
    State(#[from] StateError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ReconFlag {
    /// `μ` exceeded 1 and was replaced by 1.
    MuClamped,
    /// An azimuth is undefined and was reported as 0.
    PhaseIndeterminate,
    /// `Ī` was outside the physical range and was clamped.
    AvgIntensityClamped,
    /// A qudit chain argument was clamped into its domain.
    AmplitudeClamped,
}

#[derive(Debug, Clone, PartialEq)]
pub enum ReconstructedState {
    Qubit(QubitState),
    Qudit(QuditPureState),
}

/// First-order uncertainties of the reconstructed angles.
#[derive(Debug, Clone, PartialEq)]
pub enum Sigmas {
    Qubit { theta: f64, phi: f64, mu: f64 },
    Qudit { thetas: Vec<f64>, phis: Vec<f64> },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "repr::Result", into = "repr::Result")]
pub struct ReconstructionResult {
    pub state: ReconstructedState,
    pub rho: DensityMatrix,
    pub flags: BTreeSet<ReconFlag>,
    pub sigmas: Sigmas,
    pub fidelity_vs_target: Option<f64>,
}

impl ReconstructionResult {
    pub fn has(&self, flag: ReconFlag) -> bool {
        self.flags.contains(&flag)
    }

    /// Records the fidelity of `rho` against `target`.
    pub fn with_target(mut self, target: &DensityMatrix) -> Result<Self, StateError> {
        self.fidelity_vs_target = Some(fidelity(&self.rho, target)?);
        Ok(self)
    }

    pub fn qubit(&self) -> Option<&QubitState> {
        match &self.state {
            ReconstructedState::Qubit(s) => Some(s),
            ReconstructedState::Qudit(_) => None,
        }
    }

    pub fn qudit(&self) -> Option<&QuditPureState> {
        match &self.state {
            ReconstructedState::Qudit(s) => Some(s),
            ReconstructedState::Qubit(_) => None,
        }
    }
}

mod repr {
    use super::*;

    fn nullable<S: serde::Serializer>(v: &f64, s: S) -> std::result::Result<S::Ok, S::Error> {
        if v.is_finite() {
            s.serialize_f64(*v)
        } else {
            s.serialize_none()
        }
    }

    fn infinite_if_null<'de, D: serde::Deserializer<'de>>(d: D) -> std::result::Result<f64, D::Error> {
        Ok(Option::<f64>::deserialize(d)?.unwrap_or(f64::INFINITY))
    }

    #[derive(Serialize, Deserialize)]
    #[serde(transparent)]
    pub struct Sigma(
        #[serde(serialize_with = "nullable", deserialize_with = "infinite_if_null")] pub f64,
    );

    #[derive(Serialize, Deserialize)]
    pub struct QubitSigmas {
        pub theta: Sigma,
        pub phi: Sigma,
        pub mu: Sigma,
    }

    #[derive(Serialize, Deserialize)]
    pub struct QuditSigmas {
        pub thetas: Vec<Sigma>,
        pub phis: Vec<Sigma>,
    }

    #[derive(Serialize, Deserialize)]
    #[serde(tag = "kind", rename_all = "lowercase")]
    pub enum Result {
        Qubit {
            theta: f64,
            phi: f64,
            mu: f64,
            rho: DensityMatrix,
            flags: BTreeSet<ReconFlag>,
            sigmas: QubitSigmas,
            #[serde(default, skip_serializing_if = "Option::is_none")]
            fidelity_vs_target: Option<f64>,
        },
        Qudit {
            thetas: Vec<f64>,
            phis: Vec<f64>,
            rho: DensityMatrix,
            flags: BTreeSet<ReconFlag>,
            sigmas: QuditSigmas,
            #[serde(default, skip_serializing_if = "Option::is_none")]
            fidelity_vs_target: Option<f64>,
        },
    }

    impl From<ReconstructionResult> for Result {
        fn from(r: ReconstructionResult) -> Self {
            match (r.state, r.sigmas) {
                (ReconstructedState::Qubit(s), Sigmas::Qubit { theta, phi, mu }) => Result::Qubit {
                    theta: s.theta(),
                    phi: s.phi(),
                    mu: s.mu(),
                    rho: r.rho,
                    flags: r.flags,
                    sigmas: QubitSigmas {
                        theta: Sigma(theta),
                        phi: Sigma(phi),
                        mu: Sigma(mu),
                    },
                    fidelity_vs_target: r.fidelity_vs_target,
                },
                (ReconstructedState::Qudit(s), sig) => {
                    let (st, sp) = match sig {
                        Sigmas::Qudit { thetas, phis } => (thetas, phis),
                        Sigmas::Qubit { .. } => (vec![f64::NAN; s.thetas().len()], vec![f64::NAN; s.phis().len()]),
                    };
                    Result::Qudit {
                        thetas: s.thetas().to_vec(),
                        phis: s.phis().to_vec(),
                        rho: r.rho,
                        flags: r.flags,
                        sigmas: QuditSigmas {
                            thetas: st.into_iter().map(Sigma).collect(),
                            phis: sp.into_iter().map(Sigma).collect(),
                        },
                        fidelity_vs_target: r.fidelity_vs_target,
                    }
                }
                (ReconstructedState::Qubit(s), Sigmas::Qudit { .. }) => Result::Qubit {
                    theta: s.theta(),
                    phi: s.phi(),
                    mu: s.mu(),
                    rho: r.rho,
                    flags: r.flags,
                    sigmas: QubitSigmas {
                        theta: Sigma(f64::NAN),
                        phi: Sigma(f64::NAN),
                        mu: Sigma(f64::NAN),
                    },
                    fidelity_vs_target: r.fidelity_vs_target,
                },
            }
        }
    }

    impl TryFrom<Result> for ReconstructionResult {
        type Error = StateError;

        fn try_from(r: Result) -> std::result::Result<Self, StateError> {
            Ok(match r {
                Result::Qubit {
                    theta,
                    phi,
                    mu,
                    rho,
                    flags,
                    sigmas,
                    fidelity_vs_target,
                } => ReconstructionResult {
                    state: ReconstructedState::Qubit(QubitState::new(theta, phi, mu)?),
                    rho,
                    flags,
                    sigmas: Sigmas::Qubit {
                        theta: sigmas.theta.0,
                        phi: sigmas.phi.0,
                        mu: sigmas.mu.0,
                    },
                    fidelity_vs_target,
                },
                Result::Qudit {
                    thetas,
                    phis,
                    rho,
                    flags,
                    sigmas,
                    fidelity_vs_target,
                } => {
                    let state = QuditPureState::new(thetas, phis)?;
                    if rho.dim() != state.dim() {
                        return Err(StateError::DimensionMismatch {
                            expected: state.dim(),
                            found: rho.dim(),
                        });
                    }
                    ReconstructionResult {
                        state: ReconstructedState::Qudit(state),
                        rho,
                        flags,
                        sigmas: Sigmas::Qudit {
                            thetas: sigmas.thetas.into_iter().map(|s| s.0).collect(),
                            phis: sigmas.phis.into_iter().map(|s| s.0).collect(),
                        },
                        fidelity_vs_target,
                    }
                }
            })
        }
    }
}
