//! Shared numerical kernels: quadrature, splines, optimization.

pub mod golden;
pub mod lm;
pub mod nnls;
pub mod quad;
pub mod spline;
