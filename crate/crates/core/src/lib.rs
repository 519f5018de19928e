//! Flux-noise spectroscopy and dielectric loss budgets for tunable
//! superconducting qubits.
//!
//! The crate covers the full analysis chain for CPMG-based noise
//! spectroscopy on SQUID transmons:
//!
//! - power-law flux-noise PSD models and matching time-domain synthesis
//!   ([`noise`]),
//! - flux-to-frequency transduction and sensitivity d(omega_q)/d(Phi)
//!   ([`transduction`]),
//! - CPMG filter functions and the rectangular approximation ([`filter`]),
//! - the coherence forward model, trace fitting, and a Monte Carlo
//!   dephasing oracle ([`dephasing`]),
//! - PSD inversion and power-law fitting ([`spectroscopy`]),
//! - participation-ratio loss budgets and T1 limits ([`loss`]).

pub mod dephasing;
pub mod error;
pub mod filter;
pub mod loss;
pub mod math;
pub mod noise;
pub mod spectroscopy;
pub mod transduction;

pub use dephasing::{
    coherence_exponent, fit_trace, monte_carlo_coherence, simulate_signal, CpmgTrace, FitOptions,
    IntegrationConfig, McCoherence, McConfig, TraceFit, TraceMeta, TracePoint,
};
pub use error::{Error, Result};
pub use filter::{CpmgSequence, RectFilter};
pub use loss::{
    fit_loss_tangents, t1_limit, t1_vs_frequency, LossDatum, LossFit, LossFitFlags, LossModel,
    ParticipationRow, ParticipationTable, ResonantChannel,
};
pub use noise::{periodogram, synthesize_trajectory, NoiseTrajectory, PowerLawPsd};
pub use spectroscopy::{
    extract_psd, fit_power_law, invert_point, ExclusionCounts, Exclusion, ExtractOptions,
    InversionOutcome, InvertedPoint, PowerLawFit, Provenance, PsdEstimate, PsdPoint,
};
pub use transduction::{FluxTuningCurve, Transduction, TransmonModel};
