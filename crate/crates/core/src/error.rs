//! Error taxonomy shared by every module in the crate.

use thiserror::Error;

/// Errors produced by the numerical pipeline.
#[derive(Debug, Error)]
pub enum Error {
    /// An argument fell outside the mathematical domain of an operation.
    #[error("domain error: {0}")]
    Domain(String),

    /// The transmon dispersive formula is invalid: effective E_J has
    /// collapsed toward (or below) E_C, e.g. near half flux at d = 0.
    #[error(
        "degenerate regime: effective E_J = {ej_hz:.3e} Hz is below \
         {threshold} x E_C = {ec_hz:.3e} Hz; qubit frequency formula invalid"
    )]
    DegenerateRegime {
        ej_hz: f64,
        ec_hz: f64,
        threshold: f64,
    },

    /// A flux query landed outside the tabulated tuning-curve range.
    #[error(
        "extrapolation error: flux {flux_phi0} Phi0 outside allowed range \
         [{min_phi0}, {max_phi0}] Phi0"
    )]
    Extrapolation {
        flux_phi0: f64,
        min_phi0: f64,
        max_phi0: f64,
    },

    /// Quadrature or another numerical kernel failed to converge.
    #[error("numerical error: {0}")]
    Numerical(String),

    /// Nonlinear fit did not converge after all restarts.
    #[error("fit failed: {0}")]
    FitFailure(String),

    /// The trace carries no resolvable decay, so T2 cannot be extracted.
    #[error("T2 unidentifiable: {0}")]
    UnidentifiableT2(String),

    /// The requested resolution or trajectory count exceeds sane limits.
    #[error("resource limit exceeded: {0}")]
    Resource(String),

    /// PSD extraction kept zero points.
    #[error("empty estimate: {0}")]
    EmptyEstimate(String),

    /// Loss-tangent design matrix is rank deficient.
    #[error("degenerate design matrix: {0}")]
    Degeneracy(String),
}

pub type Result<T> = std::result::Result<T, Error>;
