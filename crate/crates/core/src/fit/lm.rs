//! A small damped least-squares (Levenberg–Marquardt) solver.
//!
//! Steps solve `(JᵀJ + λ·diag(JᵀJ)) δ = −Jᵀr`. A step is accepted when it
//! lowers the sum of squares; λ shrinks on acceptance and grows on rejection.

use nalgebra::{DMatrix, DVector};

pub trait LeastSquares {
    fn n_params(&self) -> usize;
    fn n_residuals(&self) -> usize;
    /// Residuals `model − data`.
    fn residuals(&self, params: &[f64], out: &mut [f64]);
    /// Jacobian of the residuals, `n_residuals × n_params`.
    fn jacobian(&self, params: &[f64], out: &mut DMatrix<f64>);
    /// Maps a trial point back into the feasible region.
    fn project(&self, _params: &mut [f64]) {}
}

#[derive(Debug, Clone, Copy)]
pub struct LmOptions {
    /// Stop when the relative decrease of an accepted step is below this.
    pub ftol: f64,
    /// Stop when the scaled step is below this fraction of the scaled point.
    pub xtol: f64,
    /// Maximum number of accepted steps.
    pub max_iterations: usize,
    pub initial_lambda: f64,
}

impl Default for LmOptions {
    fn default() -> Self {
        Self {
            ftol: 1e-10,
            xtol: 1e-10,
            max_iterations: 200,
            initial_lambda: 1e-3,
        }
    }
}

#[derive(Debug, Clone)]
pub struct LmReport {
    pub params: Vec<f64>,
    /// Sum of squared residuals at `params`.
    pub cost: f64,
    pub iterations: usize,
    pub converged: bool,
}

const LAMBDA_MAX: f64 = 1e16;

fn sum_sq(r: &[f64]) -> f64 {
    r.iter().map(|x| x * x).sum()
}

pub fn minimize<P: LeastSquares>(problem: &P, start: &[f64], opts: &LmOptions) -> LmReport {
    let n = problem.n_params();
    let m = problem.n_residuals();
    let mut params = start.to_vec();
    problem.project(&mut params);
    let mut resid = vec![0.0; m];
    problem.residuals(&params, &mut resid);
    let mut cost = sum_sq(&resid);
    let mut jac = DMatrix::zeros(m, n);
    let mut trial = vec![0.0; n];
    let mut trial_resid = vec![0.0; m];
    let mut lambda = opts.initial_lambda;
    let mut iterations = 0;

    if !cost.is_finite() {
        return LmReport { params, cost, iterations, converged: false };
    }

    while iterations < opts.max_iterations {
        if cost == 0.0 {
            return LmReport { params, cost, iterations, converged: true };
        }
        problem.jacobian(&params, &mut jac);
        let jtj = jac.tr_mul(&jac);
        let grad = jac.tr_mul(&DVector::from_column_slice(&resid));
        let diag: Vec<f64> = (0..n).map(|i| jtj[(i, i)].max(1e-300)).collect();
        let scale_norm: f64 = (0..n).map(|i| diag[i] * params[i] * params[i]).sum::<f64>().sqrt();

        let mut accepted = false;
        while lambda <= LAMBDA_MAX {
            let mut a = jtj.clone();
            for i in 0..n {
                a[(i, i)] += lambda * diag[i];
            }
            let step = match a.clone().cholesky() {
                Some(ch) => ch.solve(&(-&grad)),
                None => match a.lu().solve(&(-&grad)) {
                    Some(s) => s,
                    None => {
                        lambda *= 10.0;
                        continue;
                    }
                },
            };
            for i in 0..n {
                trial[i] = params[i] + step[i];
            }
            problem.project(&mut trial);
            problem.residuals(&trial, &mut trial_resid);
            let trial_cost = sum_sq(&trial_resid);
            if trial_cost.is_finite() && trial_cost < cost {
                let step_norm: f64 = (0..n)
                    .map(|i| diag[i] * (trial[i] - params[i]).powi(2))
                    .sum::<f64>()
                    .sqrt();
                let rel_decrease = (cost - trial_cost) / cost;
                // tiny steps forced by heavy damping say nothing about convergence
                let trustworthy = lambda <= 1e4;
                params.copy_from_slice(&trial);
                std::mem::swap(&mut resid, &mut trial_resid);
                cost = trial_cost;
                lambda = (lambda / 10.0).max(1e-12);
                iterations += 1;
                accepted = true;
                if trustworthy && (rel_decrease < opts.ftol || step_norm <= opts.xtol * scale_norm) {
                    return LmReport { params, cost, iterations, converged: true };
                }
                break;
            }
            lambda *= 10.0;
        }
        if !accepted {
            // no descent direction left at machine precision
            return LmReport { params, cost, iterations, converged: true };
        }
    }
    LmReport { params, cost, iterations, converged: false }
}
