//! Nonnegative least squares (Lawson-Hanson active set).

use crate::error::{Error, Result};
use nalgebra::{DMatrix, DVector};

/// Solve min ||A x - b||^2 subject to x >= 0.
///
/// Returns the solution together with the passive (nonzero) column set.
pub fn nnls(a: &DMatrix<f64>, b: &DVector<f64>) -> Result<(DVector<f64>, Vec<usize>)> {
    let n = a.ncols();
    let m = a.nrows();
    if b.len() != m {
        return Err(Error::Domain("nnls: dimension mismatch".into()));
    }

    let mut x = DVector::zeros(n);
    let mut passive = vec![false; n];
    let scale = a.amax().max(1e-300);
    let tol = 1e-12 * scale * b.amax().max(1.0) * (m as f64);

    for _outer in 0..(8 * n + 16) {
        let w = a.transpose() * (b - a * &x);
        // Most negative-gradient free variable.
        let mut best: Option<(usize, f64)> = None;
        for j in 0..n {
            if !passive[j] && w[j] > tol {
                if best.map_or(true, |(_, bw)| w[j] > bw) {
                    best = Some((j, w[j]));
                }
            }
        }
        let Some((j_in, _)) = best else {
            break;
        };
        passive[j_in] = true;

        loop {
            let cols: Vec<usize> = (0..n).filter(|&j| passive[j]).collect();
            let sub = a.select_columns(cols.iter());
            let z_sub = sub
                .clone()
                .svd(true, true)
                .solve(b, 1e-13)
                .map_err(|e| Error::Numerical(format!("nnls inner solve failed: {e}")))?;
            let mut z = DVector::zeros(n);
            for (k, &j) in cols.iter().enumerate() {
                z[j] = z_sub[k];
            }
            if cols.iter().all(|&j| z[j] > 0.0) {
                x = z;
                break;
            }
            // Backtrack along x -> z to the first boundary.
            let mut alpha = f64::INFINITY;
            for &j in &cols {
                if z[j] <= 0.0 {
                    let denom = x[j] - z[j];
                    if denom > 0.0 {
                        alpha = alpha.min(x[j] / denom);
                    }
                }
            }
            if !alpha.is_finite() {
                alpha = 0.0;
            }
            x = &x + alpha * (&z - &x);
            for &j in &cols {
                if x[j] <= tol.max(1e-300) {
                    x[j] = 0.0;
                    passive[j] = false;
                }
            }
        }
    }

    let passive_set: Vec<usize> = (0..n).filter(|&j| passive[j]).collect();
    Ok((x, passive_set))
}
