//! Inversion of normalized CPMG decays into flux-noise PSD samples via the
//! rectangular-filter approximation, plus log-log power-law fitting.
//!
//! Each raw point (tau, signal) at pulse number N yields one PSD sample:
//! the fitted A0, A normalize the signal, the independently measured T1 is
//! divided out, and chi_point = -ln[(signal - A0)/A] - (tau - tau0)/T1 is
//! equated to (tau^2 D^2 / 2) S_omega(omega_c) * height * width of the
//! rectangle standing in for the filter function. The sample is reported
//! at f_c = omega_c / 2 pi as S_f = 2 pi S_omega.

use crate::dephasing::{CpmgTrace, TraceFit};
use crate::error::{Error, Result};
use crate::filter::{unit_rectangle, CpmgSequence, UnitRectangle};
use crate::transduction::Transduction;
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use std::f64::consts::TAU;

/// Pivot frequency for power-law fits, Hz.
pub const PIVOT_FREQ_HZ: f64 = 1.0;

/// One extracted PSD sample.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PsdPoint {
    pub freq_hz: f64,
    /// One-sided flux-noise PSD, Phi0^2/Hz.
    pub s_phi: f64,
    /// Propagated 1-sigma uncertainty, Phi0^2/Hz.
    pub sigma: f64,
}

/// Where an estimate came from.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Provenance {
    pub qubit_id: Option<String>,
    pub flux_phi0: Option<f64>,
    /// Pulse numbers that contributed points.
    pub n_pulses: Vec<u32>,
}

/// A frequency-sorted flux-noise PSD estimate.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PsdEstimate {
    pub points: Vec<PsdPoint>,
    pub provenance: Provenance,
}

impl PsdEstimate {
    pub fn freq_decades(&self) -> f64 {
        match (self.points.first(), self.points.last()) {
            (Some(lo), Some(hi)) if lo.freq_hz > 0.0 => (hi.freq_hz / lo.freq_hz).log10(),
            _ => 0.0,
        }
    }
}

/// Why a raw point produced no PSD sample.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Exclusion {
    /// Normalized signal at or above 1: no resolvable decay yet.
    NoDecay,
    /// Normalized signal below the noise-floor threshold.
    BelowNoiseFloor,
    /// chi came out non-positive after removing the T1 envelope.
    NonpositiveChi,
}

/// One successfully inverted point.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct InvertedPoint {
    pub freq_hz: f64,
    /// Flux-noise PSD sample, Phi0^2/Hz.
    pub s_phi: f64,
    pub sigma: f64,
    /// Qubit-frequency-noise PSD D^2 S_Phi, (rad/s)^2/Hz, the intermediate
    /// quantity before converting through the flux tuning slope.
    pub s_omega_q: f64,
    pub chi: f64,
    pub n_pulses: u32,
    pub tau_s: f64,
}

/// Outcome of inverting one raw data point.
#[derive(Debug, Clone, Copy)]
pub enum InversionOutcome {
    Included(InvertedPoint),
    Excluded(Exclusion),
}

/// Extraction settings.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExtractOptions {
    /// Noise-floor threshold in units of residual RMS over |A|.
    pub noise_floor_sigma: f64,
}

impl Default for ExtractOptions {
    fn default() -> Self {
        Self {
            noise_floor_sigma: 3.0,
        }
    }
}

/// Invert a single raw CPMG point into a PSD sample, or report why it was
/// excluded. `sensitivity` is d(omega_q)/d(Phi) in rad/s per Phi0.
pub fn invert_point(
    tau_s: f64,
    signal: f64,
    fit: &TraceFit,
    sensitivity: f64,
    seq: &CpmgSequence,
    t1_s: f64,
) -> Result<InversionOutcome> {
    let rect = unit_rectangle(seq.n_pulses)?;
    invert_with_unit_rect(
        tau_s,
        signal,
        fit,
        sensitivity,
        seq.n_pulses,
        t1_s,
        &rect,
        &ExtractOptions::default(),
    )
}

#[allow(clippy::too_many_arguments)]
fn invert_with_unit_rect(
    tau_s: f64,
    signal: f64,
    fit: &TraceFit,
    sensitivity: f64,
    n_pulses: u32,
    t1_s: f64,
    unit: &UnitRectangle,
    opts: &ExtractOptions,
) -> Result<InversionOutcome> {
    if !(tau_s > 0.0) || !(t1_s > 0.0) {
        return Err(Error::Domain("tau and T1 must be positive".into()));
    }
    if fit.a == 0.0 {
        return Err(Error::Domain("fit amplitude is zero".into()));
    }
    if sensitivity == 0.0 {
        return Err(Error::Domain(
            "flux sensitivity is zero (sweet spot): flux-noise PSD is not invertible".into(),
        ));
    }

    let c = (signal - fit.a0) / fit.a;
    if c >= 1.0 {
        return Ok(InversionOutcome::Excluded(Exclusion::NoDecay));
    }
    let floor = opts.noise_floor_sigma * fit.residual_rms / fit.a.abs();
    if c <= 0.0 || c < floor {
        return Ok(InversionOutcome::Excluded(Exclusion::BelowNoiseFloor));
    }
    let chi = -c.ln() - (tau_s - fit.tau0_s) / t1_s;
    if chi <= 0.0 {
        return Ok(InversionOutcome::Excluded(Exclusion::NonpositiveChi));
    }

    let rect = unit.scaled(tau_s);
    let d2 = sensitivity * sensitivity;
    // chi = (tau^2 D^2 / 2) S_omega(omega_c) * height * width.
    let s_omega = 2.0 * chi / (tau_s * tau_s * d2 * rect.height * rect.width_rad_s);
    let s_phi = TAU * s_omega;
    // First-order error propagation through the log.
    let sigma_chi = fit.residual_rms / (signal - fit.a0).abs();
    let sigma = s_phi * sigma_chi / chi;

    Ok(InversionOutcome::Included(InvertedPoint {
        freq_hz: rect.omega_c_rad_s / TAU,
        s_phi,
        sigma,
        s_omega_q: d2 * s_phi,
        chi,
        n_pulses,
        tau_s,
    }))
}

/// Counts of excluded points by reason.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ExclusionCounts {
    pub no_decay: usize,
    pub below_noise_floor: usize,
    pub nonpositive_chi: usize,
}

impl ExclusionCounts {
    fn record(&mut self, e: Exclusion) {
        match e {
            Exclusion::NoDecay => self.no_decay += 1,
            Exclusion::BelowNoiseFloor => self.below_noise_floor += 1,
            Exclusion::NonpositiveChi => self.nonpositive_chi += 1,
        }
    }

    pub fn total(&self) -> usize {
        self.no_decay + self.below_noise_floor + self.nonpositive_chi
    }
}

/// Apply `invert_point` to every raw datum across all traces and merge the
/// included points into one frequency-sorted estimate.
pub fn extract_psd(
    traces: &[CpmgTrace],
    fits: &[TraceFit],
    source: &Transduction,
    flux_phi0: f64,
    opts: &ExtractOptions,
) -> Result<(PsdEstimate, ExclusionCounts)> {
    if traces.len() != fits.len() {
        return Err(Error::Domain(format!(
            "{} traces but {} fits",
            traces.len(),
            fits.len()
        )));
    }
    if traces.is_empty() {
        return Err(Error::Domain("no traces to invert".into()));
    }
    let qubit = &traces[0].qubit_id;
    if traces
        .iter()
        .any(|t| &t.qubit_id != qubit || t.flux_phi0 != traces[0].flux_phi0)
    {
        return Err(Error::Domain(
            "all traces must share one qubit and flux point".into(),
        ));
    }

    let sensitivity = source.flux_sensitivity(flux_phi0)?;
    if sensitivity == 0.0 {
        return Err(Error::Domain(
            "flux sensitivity vanishes at the requested flux point".into(),
        ));
    }

    // The rectangle in x = omega tau units depends only on N; scale per tau.
    let mut unit_cache: BTreeMap<u32, UnitRectangle> = BTreeMap::new();
    let mut included = Vec::new();
    let mut excluded = ExclusionCounts::default();
    for (trace, fit) in traces.iter().zip(fits) {
        let unit = match unit_cache.get(&trace.n_pulses) {
            Some(u) => *u,
            None => {
                let u = unit_rectangle(trace.n_pulses)?;
                unit_cache.insert(trace.n_pulses, u);
                u
            }
        };
        for p in &trace.points {
            match invert_with_unit_rect(
                p.tau_s,
                p.signal,
                fit,
                sensitivity,
                trace.n_pulses,
                trace.t1_s,
                &unit,
                opts,
            )? {
                InversionOutcome::Included(pt) => included.push(pt),
                InversionOutcome::Excluded(e) => excluded.record(e),
            }
        }
    }
    if included.is_empty() {
        return Err(Error::EmptyEstimate(format!(
            "all {} raw points were excluded ({:?})",
            excluded.total(),
            excluded
        )));
    }

    // Deterministic merge: frequency-sorted, ties broken by N then tau.
    included.sort_by(|a, b| {
        a.freq_hz
            .partial_cmp(&b.freq_hz)
            .unwrap()
            .then(a.n_pulses.cmp(&b.n_pulses))
            .then(a.tau_s.partial_cmp(&b.tau_s).unwrap())
    });
    let mut n_values: Vec<u32> = included.iter().map(|p| p.n_pulses).collect();
    n_values.sort_unstable();
    n_values.dedup();

    let points = included
        .iter()
        .map(|p| PsdPoint {
            freq_hz: p.freq_hz,
            s_phi: p.s_phi,
            sigma: p.sigma,
        })
        .collect();
    Ok((
        PsdEstimate {
            points,
            provenance: Provenance {
                qubit_id: Some(qubit.clone()),
                flux_phi0: Some(flux_phi0),
                n_pulses: n_values,
            },
        },
        excluded,
    ))
}

/// Weighted log-log power-law fit of a PSD estimate.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct PowerLawFit {
    pub alpha: f64,
    pub alpha_err: f64,
    /// Fitted PSD at the 1 Hz pivot, Phi0^2/Hz.
    pub amplitude_at_pivot: f64,
    pub amplitude_err: f64,
    /// Frequency range of the points used, Hz.
    pub freq_range_hz: (f64, f64),
    pub n_points: usize,
}

/// Weighted least squares of log S vs log f over `freq_range_hz`.
/// Points with sigma >= S are retained but strongly down-weighted.
pub fn fit_power_law(estimate: &PsdEstimate, freq_range_hz: (f64, f64)) -> Result<PowerLawFit> {
    let (f_lo, f_hi) = freq_range_hz;
    if !(f_lo > 0.0) || !(f_hi > f_lo) {
        return Err(Error::Domain(format!(
            "bad frequency range [{f_lo}, {f_hi}]"
        )));
    }
    let pts: Vec<&PsdPoint> = estimate
        .points
        .iter()
        .filter(|p| p.freq_hz >= f_lo && p.freq_hz <= f_hi && p.s_phi > 0.0)
        .collect();
    if pts.len() < 5 {
        return Err(Error::FitFailure(format!(
            "power-law fit needs at least 5 points in range, found {}",
            pts.len()
        )));
    }

    // y = ln S = b - alpha * x, x = ln(f / pivot); weights 1/sigma_ln^2.
    let (mut sw, mut sx, mut sy, mut sxx, mut sxy) = (0.0, 0.0, 0.0, 0.0, 0.0);
    for p in &pts {
        let x = (p.freq_hz / PIVOT_FREQ_HZ).ln();
        let y = p.s_phi.ln();
        let sigma_ln = (p.sigma / p.s_phi).max(1e-6);
        let w = 1.0 / (sigma_ln * sigma_ln);
        sw += w;
        sx += w * x;
        sy += w * y;
        sxx += w * x * x;
        sxy += w * x * y;
    }
    let delta = sw * sxx - sx * sx;
    if delta <= 0.0 {
        return Err(Error::FitFailure(
            "degenerate abscissa in power-law fit".into(),
        ));
    }
    let slope = (sw * sxy - sx * sy) / delta;
    let intercept = (sxx * sy - sx * sxy) / delta;
    let var_slope = sw / delta;
    let var_intercept = sxx / delta;

    let f_min = pts
        .iter()
        .map(|p| p.freq_hz)
        .fold(f64::INFINITY, f64::min);
    let f_max = pts
        .iter()
        .map(|p| p.freq_hz)
        .fold(f64::NEG_INFINITY, f64::max);
    let amplitude = intercept.exp();
    Ok(PowerLawFit {
        alpha: -slope,
        alpha_err: var_slope.sqrt(),
        amplitude_at_pivot: amplitude,
        amplitude_err: amplitude * var_intercept.sqrt(),
        freq_range_hz: (f_min, f_max),
        n_points: pts.len(),
    })
}
