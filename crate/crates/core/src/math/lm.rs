//! Small dense Levenberg-Marquardt solver for curve fitting.
//!
//! Damped normal equations with Marquardt diagonal scaling. Problems in
//! this crate have 3-4 parameters and tens of residuals, so dense algebra
//! via nalgebra is plenty.

use crate::error::{Error, Result};
use nalgebra::{Cholesky, DMatrix, DVector};

/// A residual vector r(p) with analytic Jacobian dr/dp.
pub trait LeastSquares {
    fn residual_count(&self) -> usize;
    fn parameter_count(&self) -> usize;
    fn residuals(&self, params: &[f64], out: &mut DVector<f64>);
    fn jacobian(&self, params: &[f64], out: &mut DMatrix<f64>);
}

#[derive(Debug, Clone, Copy)]
pub struct LmOptions {
    pub max_iterations: usize,
    /// Stop when the max-norm of the gradient J^T r falls below this.
    pub gradient_tol: f64,
    /// Stop when the relative step size falls below this.
    pub step_tol: f64,
    /// Initial damping factor.
    pub lambda_init: f64,
}

impl Default for LmOptions {
    fn default() -> Self {
        Self {
            max_iterations: 200,
            gradient_tol: 1e-12,
            step_tol: 1e-12,
            lambda_init: 1e-3,
        }
    }
}

#[derive(Debug, Clone)]
pub struct LmFit {
    pub params: Vec<f64>,
    /// Sum of squared residuals at the solution.
    pub cost: f64,
    pub iterations: usize,
    pub converged: bool,
    /// (J^T J)^-1 at the solution, if invertible.
    pub covariance: Option<DMatrix<f64>>,
}

pub fn minimize<P: LeastSquares>(problem: &P, init: &[f64], opts: &LmOptions) -> Result<LmFit> {
    let m = problem.residual_count();
    let n = problem.parameter_count();
    if init.len() != n {
        return Err(Error::Domain("LM: wrong initial parameter count".into()));
    }
    if m < n {
        return Err(Error::FitFailure(format!(
            "LM: {m} residuals cannot constrain {n} parameters"
        )));
    }

    let mut params = DVector::from_column_slice(init);
    let mut r = DVector::zeros(m);
    let mut jac = DMatrix::zeros(m, n);
    problem.residuals(params.as_slice(), &mut r);
    if r.iter().any(|v| !v.is_finite()) {
        return Err(Error::FitFailure("LM: non-finite residual at start".into()));
    }
    let mut cost = r.norm_squared();
    let mut lambda = opts.lambda_init;
    let mut converged = false;
    let mut iterations = 0;

    for iter in 0..opts.max_iterations {
        iterations = iter + 1;
        problem.jacobian(params.as_slice(), &mut jac);
        let jtj = jac.transpose() * &jac;
        let grad = jac.transpose() * &r;
        if grad.amax() < opts.gradient_tol * (1.0 + cost) {
            converged = true;
            break;
        }

        let mut stepped = false;
        for _ in 0..32 {
            // Marquardt scaling: damp proportionally to the diagonal.
            let mut damped = jtj.clone();
            for i in 0..n {
                let d = jtj[(i, i)];
                damped[(i, i)] = d + lambda * d.max(1e-30);
            }
            let chol = match Cholesky::new(damped) {
                Some(c) => c,
                None => {
                    lambda *= 10.0;
                    continue;
                }
            };
            let step = chol.solve(&(-&grad));
            let trial = &params + &step;
            let mut r_trial = DVector::zeros(m);
            problem.residuals(trial.as_slice(), &mut r_trial);
            let cost_trial = r_trial.norm_squared();
            if cost_trial.is_finite() && cost_trial < cost {
                let rel_step = step.norm() / (params.norm() + 1e-30);
                params = trial;
                r = r_trial;
                cost = cost_trial;
                lambda = (lambda * 0.3).max(1e-12);
                stepped = true;
                if rel_step < opts.step_tol {
                    converged = true;
                }
                break;
            }
            lambda *= 10.0;
            if lambda > 1e12 {
                break;
            }
        }
        if converged {
            break;
        }
        if !stepped {
            // No downhill step found at any damping: treat as stalled.
            converged = grad.amax() < 1e-6 * (1.0 + cost);
            break;
        }
    }

    problem.jacobian(params.as_slice(), &mut jac);
    let covariance = (jac.transpose() * &jac).try_inverse();
    Ok(LmFit {
        params: params.as_slice().to_vec(),
        cost,
        iterations,
        converged,
        covariance,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    struct Expo {
        t: Vec<f64>,
        y: Vec<f64>,
    }
    impl LeastSquares for Expo {
        fn residual_count(&self) -> usize {
            self.t.len()
        }
        fn parameter_count(&self) -> usize {
            2
        }
        fn residuals(&self, p: &[f64], out: &mut DVector<f64>) {
            for (i, (&t, &y)) in self.t.iter().zip(&self.y).enumerate() {
                out[i] = p[0] * (-t / p[1]).exp() - y;
            }
        }
        fn jacobian(&self, p: &[f64], out: &mut DMatrix<f64>) {
            for (i, &t) in self.t.iter().enumerate() {
                let e = (-t / p[1]).exp();
                out[(i, 0)] = e;
                out[(i, 1)] = p[0] * e * t / (p[1] * p[1]);
            }
        }
    }

    #[test]
    fn recovers_exponential_parameters() {
        let t: Vec<f64> = (0..40).map(|i| i as f64 * 0.1).collect();
        let y: Vec<f64> = t.iter().map(|&t| 2.5 * (-t / 1.3).exp()).collect();
        let p = Expo { t, y };
        let fit = minimize(&p, &[1.0, 0.5], &LmOptions::default()).unwrap();
        assert!(fit.converged);
        assert_relative_eq!(fit.params[0], 2.5, max_relative = 1e-8);
        assert_relative_eq!(fit.params[1], 1.3, max_relative = 1e-8);
    }

    #[test]
    fn underdetermined_is_rejected() {
        let p = Expo {
            t: vec![0.0],
            y: vec![1.0],
        };
        assert!(minimize(&p, &[1.0, 1.0], &LmOptions::default()).is_err());
    }
}
