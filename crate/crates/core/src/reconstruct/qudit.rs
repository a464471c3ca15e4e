use std::collections::BTreeSet;
use std::f64::consts::PI;

use nalgebra::DMatrix;

use super::qubit::{check_estimate, POLE_SIN};
use super::{ReconFlag, ReconstructError, ReconstructedState, ReconstructionResult, Sigmas};
use crate::angle::wrap_phase;
use crate::fit::lm::{minimize, LeastSquares, LmOptions};
use crate::fit::{EstimateFlag, FringeEstimate};
use crate::quantum::{DensityMatrix, QuditPureState, SubspaceMoments};
use crate::Complex64;

/// Downstream weight below which a pole is treated as the end of the state.
const NEGLIGIBLE_WEIGHT: f64 = 1e-6;
/// Coherence magnitude below which a subspace azimuth is undefined.
const NEGLIGIBLE_COHERENCE: f64 = 1e-12;

/// Observables of one qudit interferogram in absolute moment units.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuditInput {
    /// `⟨ψ_k|ψ_k⟩ + ⟨ψ_k|Π₀|ψ_k⟩`, four times the average intensity.
    pub level: f64,
    /// `|⟨ψ_k|σ₋|ψ_k⟩|`, twice the fringe amplitude.
    pub coherence: f64,
    pub phase: f64,
    pub sigma_level: f64,
    pub sigma_coherence: f64,
    pub sigma_phase: f64,
    pub phase_defined: bool,
}

impl QuditInput {
    pub fn from_estimate(est: &FringeEstimate) -> Result<Self, ReconstructError> {
        check_estimate(est)?;
        let (avg, vis) = (est.avg_intensity.max(0.0), est.visibility);
        let phase_defined = !est.has(EstimateFlag::PhaseIndeterminate);
        Ok(Self {
            level: 4.0 * avg,
            coherence: 2.0 * vis * avg,
            phase: if phase_defined { est.phase_shift } else { 0.0 },
            sigma_level: 4.0 * est.avg_intensity_std,
            sigma_coherence: 2.0 * (vis * est.avg_intensity_std).hypot(avg * est.visibility_std),
            sigma_phase: if phase_defined { est.phase_std } else { f64::INFINITY },
            phase_defined,
        })
    }

    /// Exact input from known subspace moments.
    pub fn from_moments(m: &SubspaceMoments) -> Self {
        Self {
            level: m.norm_sq + m.m_pi,
            coherence: m.m_sigma.norm(),
            phase: m.m_sigma.arg(),
            sigma_level: 0.0,
            sigma_coherence: 0.0,
            sigma_phase: 0.0,
            phase_defined: m.m_sigma.norm() > NEGLIGIBLE_COHERENCE,
        }
    }
}

/// Sequential inversion of `d − 1` interferograms (ordered `k = 1..d−1`)
/// into a pure qudit.
pub fn invert_qudit(ests: &[FringeEstimate], dim: usize) -> Result<ReconstructionResult, ReconstructError> {
    let inputs = ests.iter().map(QuditInput::from_estimate).collect::<Result<Vec<_>, _>>()?;
    invert_qudit_moments(&inputs, dim)
}

pub fn invert_qudit_moments(inputs: &[QuditInput], dim: usize) -> Result<ReconstructionResult, ReconstructError> {
    if dim < 2 || inputs.len() + 1 != dim {
        return Err(ReconstructError::EstimateCount {
            dim,
            expected: dim.saturating_sub(1),
            found: inputs.len(),
        });
    }
    if inputs
        .iter()
        .any(|i| !i.level.is_finite() || !i.coherence.is_finite() || (i.phase_defined && !i.phase.is_finite()))
    {
        return Err(ReconstructError::InvalidEstimate("non-finite observable"));
    }

    let n_roots = if dim == 2 { 1 } else { 2 };
    let mut best: Option<(f64, usize, Chain)> = None;
    let mut first_err = None;
    for root in 0..n_roots {
        match chain(inputs, root) {
            Ok(c) => {
                let cost = mismatch(&c.thetas, &c.phis, inputs);
                if best.as_ref().is_none_or(|(b, _, _)| cost < *b) {
                    best = Some((cost, root, c));
                }
            }
            Err(e) => {
                first_err.get_or_insert(e);
            }
        }
    }
    let (cost, root, mut c) = match (best, first_err) {
        // the consistent branch broke down; the surviving one only fits by clamping
        (Some((_, _, c)), Some(e)) if c.clamped => return Err(e),
        (Some(b), _) => b,
        (None, e) => return Err(e.expect("at least one root tried")),
    };

    let mut flags = BTreeSet::new();
    if c.clamped {
        flags.insert(if dim == 2 {
            ReconFlag::AvgIntensityClamped
        } else {
            ReconFlag::AmplitudeClamped
        });
        if dim > 2 {
            refine(&mut c, inputs, cost);
        }
    }
    if c.indeterminate {
        flags.insert(ReconFlag::PhaseIndeterminate);
    }

    let sigmas = propagate(inputs, root, &c);
    let phis: Vec<f64> = c.phis.iter().map(|&p| wrap_phase(p)).collect();
    let state = QuditPureState::new(c.thetas, phis)?;
    Ok(ReconstructionResult {
        rho: DensityMatrix::from_pure(&state.amplitudes())?,
        state: ReconstructedState::Qudit(state),
        flags,
        sigmas,
        fidelity_vs_target: None,
    })
}

#[derive(Debug, Clone)]
struct Chain {
    thetas: Vec<f64>,
    phis: Vec<f64>,
    clamped: bool,
    indeterminate: bool,
}

fn clamp_flag(x: f64, lo: f64, hi: f64, flag: &mut bool) -> f64 {
    let y = x.clamp(lo, hi);
    if y != x {
        *flag = true;
    }
    y
}

fn chain(inputs: &[QuditInput], root: usize) -> Result<Chain, ReconstructError> {
    let n = inputs.len();
    let mut c = Chain {
        thetas: vec![0.0; n],
        phis: vec![0.0; n],
        clamped: false,
        indeterminate: false,
    };

    if n == 1 {
        let cos_theta = clamp_flag(2.0 * inputs[0].level - 3.0, -1.0, 1.0, &mut c.clamped);
        c.thetas[0] = cos_theta.acos();
        let coherence = 0.5 * c.thetas[0].sin();
        set_phase(&mut c, inputs, 0, coherence);
        return Ok(c);
    }

    // k = 1: level S = 2c + (1 − c)t and coherence² M² = c(1 − c)t with
    // c = cos²(θ₁/2), t = cos²(θ₂/2); eliminating t gives 2c² − Sc + M² = 0
    let (s, m) = (inputs[0].level, inputs[0].coherence);
    let disc = clamp_flag(s * s - 8.0 * m * m, 0.0, f64::INFINITY, &mut c.clamped);
    let sign = if root == 0 { 1.0 } else { -1.0 };
    let c1 = clamp_flag((s + sign * disc.sqrt()) / 4.0, 0.0, 1.0, &mut c.clamped);
    c.thetas[0] = 2.0 * c1.sqrt().acos();
    let mut xi = 1.0 - c1;
    if xi < f64::EPSILON {
        truncate(&mut c, 1, 0);
        return Ok(c);
    }
    let t = clamp_flag((s - 2.0 * c1) / xi, 0.0, 1.0, &mut c.clamped);
    c.thetas[1] = 2.0 * t.sqrt().acos();
    let coherence = 0.5 * c.thetas[0].sin() * t.sqrt();
    set_phase(&mut c, inputs, 0, coherence);

    // k ≥ 2: the coherence fixes θ_{k+1} given θ_k and ξ(k)
    for k in 1..n {
        let theta = c.thetas[k];
        let sin_theta = theta.sin();
        let weight_next = xi * (theta / 2.0).sin().powi(2);
        if k == n - 1 {
            set_phase(&mut c, inputs, k, xi * 0.5 * sin_theta);
            break;
        }
        if sin_theta < POLE_SIN {
            if weight_next < NEGLIGIBLE_WEIGHT {
                truncate(&mut c, k + 1, k);
                return Ok(c);
            }
            return Err(ReconstructError::IllConditioned { k: k + 1 });
        }
        let arg = clamp_flag(2.0 * inputs[k].coherence / (xi * sin_theta), 0.0, 1.0, &mut c.clamped);
        c.thetas[k + 1] = 2.0 * arg.acos();
        set_phase(&mut c, inputs, k, xi * 0.5 * sin_theta * arg);
        xi = weight_next;
    }
    Ok(c)
}

/// `φ_k` from the measured phase when the reconstructed coherence is nonzero.
fn set_phase(c: &mut Chain, inputs: &[QuditInput], k: usize, coherence: f64) {
    if inputs[k].phase_defined && coherence > NEGLIGIBLE_COHERENCE {
        c.phis[k] = inputs[k].phase;
    } else {
        c.phis[k] = 0.0;
        c.indeterminate = true;
    }
}

/// Zeroes `θ_j` for `j ≥ from_theta` and `φ_j` for `j ≥ from_phi`.
fn truncate(c: &mut Chain, from_theta: usize, from_phi: usize) {
    c.thetas[from_theta..].iter_mut().for_each(|t| *t = 0.0);
    c.phis[from_phi..].iter_mut().for_each(|p| *p = 0.0);
    c.indeterminate = true;
}

/// Moments of a state given directly by its angles, without validation.
fn moments(thetas: &[f64], phis: &[f64]) -> Vec<(f64, Complex64)> {
    let n = thetas.len();
    let mut xi = 1.0;
    (0..n)
        .map(|k| {
            let (sh, ch) = (thetas[k] / 2.0).sin_cos();
            let next = if k + 1 < n { (thetas[k + 1] / 2.0).cos() } else { 1.0 };
            let level = xi * (2.0 * ch * ch + sh * sh * next * next);
            let coherence = Complex64::from_polar(xi * sh * ch * next, phis[k]);
            xi *= sh * sh;
            (level, coherence)
        })
        .collect()
}

fn residuals_into(thetas: &[f64], phis: &[f64], inputs: &[QuditInput], out: &mut [f64]) {
    for (k, ((level, m), inp)) in moments(thetas, phis).into_iter().zip(inputs).enumerate() {
        out[3 * k] = level - inp.level;
        if inp.phase_defined {
            let target = Complex64::from_polar(inp.coherence, inp.phase);
            out[3 * k + 1] = m.re - target.re;
            out[3 * k + 2] = m.im - target.im;
        } else {
            out[3 * k + 1] = m.norm() - inp.coherence;
            out[3 * k + 2] = 0.0;
        }
    }
}

fn mismatch(thetas: &[f64], phis: &[f64], inputs: &[QuditInput]) -> f64 {
    let mut r = vec![0.0; 3 * inputs.len()];
    residuals_into(thetas, phis, inputs, &mut r);
    r.iter().map(|x| x * x).sum()
}

struct JointProblem<'a> {
    inputs: &'a [QuditInput],
}

impl LeastSquares for JointProblem<'_> {
    fn n_params(&self) -> usize {
        2 * self.inputs.len()
    }

    fn n_residuals(&self) -> usize {
        3 * self.inputs.len()
    }

    fn residuals(&self, p: &[f64], out: &mut [f64]) {
        let n = self.inputs.len();
        residuals_into(&p[..n], &p[n..], self.inputs, out);
    }

    fn jacobian(&self, p: &[f64], out: &mut DMatrix<f64>) {
        let m = self.n_residuals();
        let (mut plus, mut minus) = (vec![0.0; m], vec![0.0; m]);
        let mut q = p.to_vec();
        for j in 0..p.len() {
            let h = 1e-7;
            q[j] = p[j] + h;
            self.residuals(&q, &mut plus);
            q[j] = p[j] - h;
            self.residuals(&q, &mut minus);
            q[j] = p[j];
            for i in 0..m {
                out[(i, j)] = (plus[i] - minus[i]) / (2.0 * h);
            }
        }
    }

    fn project(&self, p: &mut [f64]) {
        let n = self.inputs.len();
        p[..n].iter_mut().for_each(|t| *t = t.clamp(0.0, PI));
    }
}

/// Joint least-squares polish of a chain answer against every moment.
fn refine(c: &mut Chain, inputs: &[QuditInput], chain_cost: f64) {
    let problem = JointProblem { inputs };
    let start: Vec<f64> = c.thetas.iter().chain(&c.phis).copied().collect();
    let report = minimize(&problem, &start, &LmOptions::default());
    if report.cost.is_finite() && report.cost < chain_cost && report.params.iter().all(|v| v.is_finite()) {
        let n = inputs.len();
        c.thetas.copy_from_slice(&report.params[..n]);
        for (k, p) in report.params[n..].iter().enumerate() {
            if inputs[k].phase_defined {
                c.phis[k] = *p;
            }
        }
    }
}

/// Delta-method uncertainties: `θ` by central differences of the chain on
/// the chosen root, `φ_k` directly from the phase spread.
fn propagate(inputs: &[QuditInput], root: usize, c: &Chain) -> Sigmas {
    let n = inputs.len();
    let mut var = vec![0.0f64; n];
    for k in 0..n {
        for (which, sigma) in [(0, inputs[k].sigma_level), (1, inputs[k].sigma_coherence)] {
            if sigma == 0.0 {
                continue;
            }
            if !sigma.is_finite() {
                var.iter_mut().for_each(|v| *v = f64::INFINITY);
                continue;
            }
            let base = if which == 0 { inputs[k].level } else { inputs[k].coherence };
            let h = 1e-6 * base.abs().max(1e-3);
            let eval = |delta: f64| {
                let mut shifted = inputs.to_vec();
                if which == 0 {
                    shifted[k].level += delta;
                } else {
                    shifted[k].coherence += delta;
                }
                chain(&shifted, root).ok().map(|ch| ch.thetas)
            };
            match (eval(h), eval(-h)) {
                (Some(p), Some(m)) => {
                    for j in 0..n {
                        var[j] += ((p[j] - m[j]) / (2.0 * h) * sigma).powi(2);
                    }
                }
                _ => var.iter_mut().for_each(|v| *v = f64::INFINITY),
            }
        }
    }
    let phis = inputs
        .iter()
        .zip(&c.phis)
        .map(|(i, _)| if i.phase_defined { i.sigma_phase } else { f64::INFINITY })
        .collect();
    Sigmas::Qudit {
        thetas: var.into_iter().map(f64::sqrt).collect(),
        phis,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::quantum::pure_fidelity;
    use crate::reconstruct::reconstruct_pure_assumed;
    use proptest::prelude::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use std::f64::consts::FRAC_PI_2;

    fn exact_inputs(s: &QuditPureState) -> Vec<QuditInput> {
        (1..s.dim())
            .map(|k| QuditInput::from_moments(&s.subspace_moments(k).unwrap()))
            .collect()
    }

    fn exact_estimates(s: &QuditPureState) -> Vec<FringeEstimate> {
        (1..s.dim())
            .map(|k| {
                let o = crate::optics::qudit_fringe_observables(s, k).unwrap();
                FringeEstimate::exact(o.phase_shift, o.visibility, o.avg_intensity)
            })
            .collect()
    }

    #[test]
    fn qutrit_equator() {
        let s = QuditPureState::new(vec![FRAC_PI_2, FRAC_PI_2], vec![0.3, 0.7]).unwrap();
        let r = invert_qudit(&exact_estimates(&s), 3).unwrap();
        let q = r.qudit().unwrap();
        for (a, b) in q.thetas().iter().zip(s.thetas()) {
            assert!((a - b).abs() < 1e-9, "{:?}", q);
        }
        for (a, b) in q.phis().iter().zip(s.phis()) {
            assert!((a - b).abs() < 1e-9);
        }
    }

    #[test]
    fn random_states_round_trip() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for d in [3, 4, 5] {
            for _ in 0..100 {
                let s = QuditPureState::random(d, &mut rng).unwrap();
                let r = invert_qudit_moments(&exact_inputs(&s), d).unwrap();
                let f = pure_fidelity(&r.qudit().unwrap().amplitudes(), &s.amplitudes()).unwrap();
                assert!(f >= 1.0 - 1e-9, "d={d} f={f} {s:?} -> {:?}", r.qudit());
            }
        }
    }

    #[test]
    fn qubit_case_matches_pure_inversion() {
        for (theta, phi) in [(0.3, 1.0), (2.0, -2.5), (FRAC_PI_2, 0.0)] {
            let s = QuditPureState::new(vec![theta], vec![phi]).unwrap();
            let est = exact_estimates(&s);
            let a = invert_qudit(&est, 2).unwrap();
            let b = reconstruct_pure_assumed(&est[0]).unwrap();
            let (qa, qb) = (a.qudit().unwrap(), b.qubit().unwrap());
            assert_eq!(qa.thetas()[0], qb.theta());
            assert_eq!(qa.phis()[0], qb.phi());
        }
    }

    #[test]
    fn count_mismatch() {
        let e = FringeEstimate::exact(0.0, 0.5, 0.3);
        assert!(matches!(
            invert_qudit(std::slice::from_ref(&e), 3),
            Err(ReconstructError::EstimateCount { dim: 3, expected: 2, found: 1 })
        ));
        assert!(matches!(invert_qudit(&[], 1), Err(ReconstructError::EstimateCount { .. })));
    }

    #[test]
    fn basis_states() {
        // |1⟩: everything in the first level, later angles irrelevant
        let s = QuditPureState::new(vec![0.0, 1.0, 2.0], vec![0.0; 3]).unwrap();
        let r = invert_qudit_moments(&exact_inputs(&s), 4).unwrap();
        let f = pure_fidelity(&r.qudit().unwrap().amplitudes(), &s.amplitudes()).unwrap();
        assert!(f > 1.0 - 1e-12);
        assert!(r.has(ReconFlag::PhaseIndeterminate));

        // |3⟩ of a qutrit
        let s = QuditPureState::new(vec![PI, PI], vec![0.0; 2]).unwrap();
        let r = invert_qudit_moments(&exact_inputs(&s), 3).unwrap();
        let f = pure_fidelity(&r.qudit().unwrap().amplitudes(), &s.amplitudes()).unwrap();
        assert!(f > 1.0 - 1e-12);
    }

    #[test]
    fn pole_with_downstream_weight_is_ill_conditioned() {
        let s = QuditPureState::new(vec![1.0, PI, 1.0], vec![0.1, 0.2, 0.3]).unwrap();
        let err = invert_qudit_moments(&exact_inputs(&s), 4).unwrap_err();
        assert_eq!(err, ReconstructError::IllConditioned { k: 2 });
    }

    #[test]
    fn inconsistent_moments_trigger_refinement() {
        let s = QuditPureState::new(vec![1.2, 0.9], vec![0.4, -0.6]).unwrap();
        let mut inputs = exact_inputs(&s);
        inputs[0].coherence *= 1.4;
        let r = invert_qudit_moments(&inputs, 3).unwrap();
        assert!(r.has(ReconFlag::AmplitudeClamped));
        let q = r.qudit().unwrap();
        let refined = mismatch(q.thetas(), q.phis(), &inputs);
        let unrefined = chain(&inputs, 0)
            .into_iter()
            .chain(chain(&inputs, 1))
            .map(|c| mismatch(&c.thetas, &c.phis, &inputs))
            .fold(f64::INFINITY, f64::min);
        assert!(refined <= unrefined);
    }

    proptest! {
        #[test]
        fn global_phase_invariance(seed in 0u64..1000, g in -PI..PI) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let s = QuditPureState::random(4, &mut rng).unwrap();
            let rotated: Vec<_> = s.amplitudes().iter().map(|a| a * Complex64::from_polar(1.0, g)).collect();
            let s2 = QuditPureState::from_amplitudes(&rotated).unwrap();
            let r = invert_qudit_moments(&exact_inputs(&s2), 4).unwrap();
            let f = pure_fidelity(&r.qudit().unwrap().amplitudes(), &rotated).unwrap();
            prop_assert!(f > 1.0 - 1e-9);
        }
    }
}
