//! Natural cubic spline interpolation with analytic first derivative.

use crate::error::{Error, Result};

/// Natural cubic spline through strictly increasing knots.
#[derive(Debug, Clone)]
pub struct CubicSpline {
    x: Vec<f64>,
    y: Vec<f64>,
    /// Second derivatives at the knots (natural: zero at both ends).
    m: Vec<f64>,
}

impl CubicSpline {
    pub fn new(x: Vec<f64>, y: Vec<f64>) -> Result<Self> {
        if x.len() != y.len() {
            return Err(Error::Domain("spline: x and y lengths differ".into()));
        }
        if x.len() < 3 {
            return Err(Error::Domain("spline needs at least 3 knots".into()));
        }
        if x.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::Domain("spline knots must be strictly increasing".into()));
        }
        let n = x.len();
        // Tridiagonal system for interior second derivatives (Thomas algorithm).
        let mut sub = vec![0.0; n];
        let mut diag = vec![0.0; n];
        let mut sup = vec![0.0; n];
        let mut rhs = vec![0.0; n];
        diag[0] = 1.0;
        diag[n - 1] = 1.0;
        for i in 1..n - 1 {
            let h0 = x[i] - x[i - 1];
            let h1 = x[i + 1] - x[i];
            sub[i] = h0;
            diag[i] = 2.0 * (h0 + h1);
            sup[i] = h1;
            rhs[i] = 6.0 * ((y[i + 1] - y[i]) / h1 - (y[i] - y[i - 1]) / h0);
        }
        // Forward elimination.
        for i in 1..n {
            let w = sub[i] / diag[i - 1];
            diag[i] -= w * sup[i - 1];
            rhs[i] -= w * rhs[i - 1];
        }
        // Back substitution.
        let mut m = vec![0.0; n];
        m[n - 1] = rhs[n - 1] / diag[n - 1];
        for i in (0..n - 1).rev() {
            m[i] = (rhs[i] - sup[i] * m[i + 1]) / diag[i];
        }
        Ok(Self { x, y, m })
    }

    pub fn domain(&self) -> (f64, f64) {
        (self.x[0], *self.x.last().unwrap())
    }

    fn segment(&self, t: f64) -> usize {
        // Binary search for the interval containing t; clamp into range.
        match self.x.binary_search_by(|v| v.partial_cmp(&t).unwrap()) {
            Ok(i) => i.min(self.x.len() - 2),
            Err(i) => i.saturating_sub(1).min(self.x.len() - 2),
        }
    }

    /// Interpolated value; `t` must lie inside the knot range.
    pub fn eval(&self, t: f64) -> Result<f64> {
        let (lo, hi) = self.domain();
        if t < lo || t > hi {
            return Err(Error::Extrapolation {
                flux_phi0: t,
                min_phi0: lo,
                max_phi0: hi,
            });
        }
        let i = self.segment(t);
        let h = self.x[i + 1] - self.x[i];
        let a = (self.x[i + 1] - t) / h;
        let b = (t - self.x[i]) / h;
        Ok(a * self.y[i]
            + b * self.y[i + 1]
            + ((a.powi(3) - a) * self.m[i] + (b.powi(3) - b) * self.m[i + 1]) * h * h / 6.0)
    }

    /// Analytic first derivative of the interpolant.
    pub fn derivative(&self, t: f64) -> Result<f64> {
        let (lo, hi) = self.domain();
        if t < lo || t > hi {
            return Err(Error::Extrapolation {
                flux_phi0: t,
                min_phi0: lo,
                max_phi0: hi,
            });
        }
        let i = self.segment(t);
        let h = self.x[i + 1] - self.x[i];
        let a = (self.x[i + 1] - t) / h;
        let b = (t - self.x[i]) / h;
        Ok((self.y[i + 1] - self.y[i]) / h
            + ((3.0 * b * b - 1.0) * self.m[i + 1] - (3.0 * a * a - 1.0) * self.m[i]) * h / 6.0)
    }

    /// Knot positions.
    pub fn knots(&self) -> &[f64] {
        &self.x
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn reproduces_knot_values() {
        let x: Vec<f64> = (0..10).map(|i| i as f64).collect();
        let y: Vec<f64> = x.iter().map(|v| (0.3 * v).sin()).collect();
        let s = CubicSpline::new(x.clone(), y.clone()).unwrap();
        for (xi, yi) in x.iter().zip(&y) {
            assert_relative_eq!(s.eval(*xi).unwrap(), *yi, epsilon = 1e-12);
        }
    }

    #[test]
    fn derivative_tracks_smooth_function() {
        let n = 201;
        let x: Vec<f64> = (0..n).map(|i| -1.0 + 2.0 * i as f64 / (n - 1) as f64).collect();
        let y: Vec<f64> = x.iter().map(|v| (2.0 * v).cos()).collect();
        let s = CubicSpline::new(x, y).unwrap();
        for i in 10..190 {
            let t = -1.0 + 2.0 * i as f64 / 200.0 + 0.004;
            let exact = -2.0 * (2.0 * t).sin();
            let got = s.derivative(t).unwrap();
            assert!((got - exact).abs() < 2e-4, "t={t} got={got} exact={exact}");
        }
    }

    #[test]
    fn rejects_out_of_range() {
        let s = CubicSpline::new(vec![0.0, 1.0, 2.0], vec![0.0, 1.0, 0.0]).unwrap();
        assert!(matches!(s.eval(-0.1), Err(Error::Extrapolation { .. })));
        assert!(matches!(s.derivative(2.1), Err(Error::Extrapolation { .. })));
    }

    #[test]
    fn rejects_non_monotone_knots() {
        assert!(CubicSpline::new(vec![0.0, 0.0, 1.0], vec![0.0, 1.0, 2.0]).is_err());
    }
}
