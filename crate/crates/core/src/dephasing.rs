//! CPMG coherence forward model, synthetic trace factory, trace fitting,
//! and an independent time-domain Monte Carlo dephasing oracle.
//!
//! The coherence exponent is
//!
//!   chi(tau, N) = (tau^2 D^2 / 2) * int S_omega(w) g_N(w, tau) dw,
//!
//! with D = d(omega_q)/d(Phi) and S_omega the one-sided angular-frequency
//! flux PSD. For Gaussian noise the coherence is exp(-chi): the factor 1/2
//! makes exp(-chi) equal |<e^{i phi}>| for accumulated phase
//! phi = D int f(t) dPhi(t) dt, which the Monte Carlo oracle checks
//! trajectory by trajectory. Measured signals follow
//!
//!   signal(tau) = A0 + A exp(-chi) exp(-(tau - tau0) / T1),
//!
//! and raw traces are normalized by fitting A0, A, T2 with T1 held fixed.

use crate::error::{Error, Result};
use crate::filter::{filter_shape, CpmgSequence};
use crate::math::lm::{self, LeastSquares, LmOptions};
use crate::math::quad;
use crate::noise::{synthesize_with_rng, PowerLawPsd};
use nalgebra::{DMatrix, DVector};
use rand::prelude::*;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use std::f64::consts::{PI, TAU};

/// Ultraviolet cutoff for the chi integral, in units of pi N / tau.
pub const CHI_OMEGA_UV_FACTOR: f64 = 400.0;

/// Settings for the chi quadrature.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct IntegrationConfig {
    /// Acquisition time setting the infrared cutoff omega_ir = 2 pi / T_acq, s.
    pub acquisition_time_s: f64,
    /// Relative quadrature tolerance.
    pub rel_tol: f64,
    /// Segment budget for the adaptive quadrature.
    pub max_segments: usize,
}

impl Default for IntegrationConfig {
    fn default() -> Self {
        Self {
            acquisition_time_s: 1e-2,
            rel_tol: 1e-5,
            max_segments: 40_000,
        }
    }
}

impl IntegrationConfig {
    pub fn with_acquisition_time(acquisition_time_s: f64) -> Self {
        Self {
            acquisition_time_s,
            ..Self::default()
        }
    }
}

/// One raw CPMG data point.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TracePoint {
    pub tau_s: f64,
    pub signal: f64,
}

/// Raw CPMG decay data for one pulse number at one flux point.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CpmgTrace {
    pub n_pulses: u32,
    pub points: Vec<TracePoint>,
    /// Independently measured T1, s.
    pub t1_s: f64,
    pub qubit_id: String,
    pub flux_phi0: f64,
}

impl CpmgTrace {
    pub fn new(
        n_pulses: u32,
        points: Vec<TracePoint>,
        t1_s: f64,
        qubit_id: impl Into<String>,
        flux_phi0: f64,
    ) -> Result<Self> {
        if n_pulses < 1 {
            return Err(Error::Domain("trace needs n_pulses >= 1".into()));
        }
        if points.len() < 8 {
            return Err(Error::Domain(format!(
                "trace needs at least 8 points, got {}",
                points.len()
            )));
        }
        if points.windows(2).any(|w| w[0].tau_s >= w[1].tau_s) {
            return Err(Error::Domain(
                "trace tau values must be strictly increasing".into(),
            ));
        }
        if points
            .iter()
            .any(|p| !p.tau_s.is_finite() || !p.signal.is_finite() || p.tau_s <= 0.0)
        {
            return Err(Error::Domain(
                "trace values must be finite with positive tau".into(),
            ));
        }
        if !(t1_s > 0.0) {
            return Err(Error::Domain(format!("T1 must be positive, got {t1_s}")));
        }
        Ok(Self {
            n_pulses,
            points,
            t1_s,
            qubit_id: qubit_id.into(),
            flux_phi0,
        })
    }
}

/// Fitted trace parameters: signal = a0 + a exp(-(tau-tau0)^2 / 2 T2^2)
/// exp(-(tau-tau0)/T1) with T1 fixed.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct TraceFit {
    pub a0: f64,
    pub a: f64,
    pub t2_s: f64,
    pub tau0_s: f64,
    pub residual_rms: f64,
    /// Tau range over which the normalized signal sits above the noise
    /// floor and is included in PSD extraction.
    pub included_range_s: Option<(f64, f64)>,
}

/// Options for `fit_trace`.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FitOptions {
    /// Fit tau0 as a free parameter instead of pinning it to zero.
    pub fit_tau0: bool,
    /// Multi-start perturbations tried when the base fit fails.
    pub restarts: u32,
    /// Noise-floor threshold in units of residual RMS.
    pub noise_floor_sigma: f64,
}

impl Default for FitOptions {
    fn default() -> Self {
        Self {
            fit_tau0: false,
            restarts: 5,
            noise_floor_sigma: 3.0,
        }
    }
}

/// chi(tau, N) for the given PSD and flux sensitivity (rad/s per Phi0).
pub fn coherence_exponent(
    psd: &PowerLawPsd,
    sensitivity: f64,
    seq: &CpmgSequence,
    cfg: &IntegrationConfig,
) -> Result<f64> {
    psd.validate()?;
    if !sensitivity.is_finite() {
        return Err(Error::Domain("sensitivity must be finite".into()));
    }
    if !(cfg.acquisition_time_s > 0.0) {
        return Err(Error::Domain("acquisition time must be positive".into()));
    }
    if psd.is_zero() || sensitivity == 0.0 {
        return Ok(0.0);
    }
    let tau = seq.tau_s;
    let n = seq.n_pulses;
    // Work in x = omega * tau.
    let x_ir = TAU / cfg.acquisition_time_s * tau;
    let x_uv = CHI_OMEGA_UV_FACTOR * PI * n as f64;
    if x_ir >= x_uv {
        return Err(Error::Domain(format!(
            "infrared cutoff {:.3e} rad/s exceeds ultraviolet cutoff {:.3e} rad/s",
            x_ir / tau,
            x_uv / tau
        )));
    }

    let amplitude = psd.amplitude;
    let pivot = psd.pivot_freq_hz;
    let alpha = psd.alpha;
    let floor = psd.white_floor;
    // S_omega(x / tau) in closed form; x > 0 on the whole panel set.
    let integrand = move |x: f64| {
        let f_hz = x / tau / TAU;
        let s_f = amplitude * (pivot / f_hz).powf(alpha) + floor;
        (s_f / TAU) * filter_shape(n, x)
    };

    let edges = chi_panel_edges(x_ir, x_uv, n);
    let integral = quad::integrate(integrand, &edges, cfg.rel_tol, cfg.max_segments)
        .map_err(|e| {
            Error::Numerical(format!(
                "chi quadrature failed (N = {n}, tau = {tau:.3e} s): {e}"
            ))
        })?;
    // Integral was over x = omega tau: d omega = dx / tau.
    Ok(0.5 * tau * sensitivity * sensitivity * integral.value)
}

/// Panel edges in x = omega * tau for the chi integrand: logarithmic below
/// the first lobe, pi-wide through the harmonic structure, geometric tail.
fn chi_panel_edges(x_ir: f64, x_uv: f64, n_pulses: u32) -> Vec<f64> {
    let n = n_pulses as f64;
    let mut edges = vec![x_ir];
    let mut x = x_ir;
    while x * 2.0 < 1.0_f64.min(x_uv) {
        x *= 2.0;
        edges.push(x);
    }
    let lobe_end = (6.0 * PI * n).min(x_uv);
    let mut k = (edges.last().unwrap() / PI).floor() + 1.0;
    while k * PI < lobe_end {
        edges.push(k * PI);
        k += 1.0;
    }
    if *edges.last().unwrap() < lobe_end {
        edges.push(lobe_end);
    }
    // Sidelobe tail: panels of one oscillation period keep the
    // Gauss-Kronrod error estimates honest out to the ultraviolet cutoff.
    let mut x = *edges.last().unwrap() + 2.0 * PI;
    while x < x_uv {
        edges.push(x);
        x += 2.0 * PI;
    }
    if *edges.last().unwrap() < x_uv {
        edges.push(x_uv);
    }
    edges
}

/// Identifying metadata stamped onto simulated traces.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TraceMeta {
    pub qubit_id: String,
    pub flux_phi0: f64,
}

/// Simulate measured CPMG signals on the given sequences. Sequences are
/// grouped by pulse number into one trace per N; readout noise is Gaussian
/// with scale `noise_rms`, deterministic per seed and independent of the
/// input ordering.
#[allow(clippy::too_many_arguments)]
pub fn simulate_signal(
    psd: &PowerLawPsd,
    sensitivity: f64,
    seqs: &[CpmgSequence],
    t1_s: f64,
    a0: f64,
    a: f64,
    noise_rms: f64,
    seed: u64,
    cfg: &IntegrationConfig,
    meta: &TraceMeta,
) -> Result<Vec<CpmgTrace>> {
    if !(t1_s > 0.0) {
        return Err(Error::Domain(format!("T1 must be positive, got {t1_s}")));
    }
    for v in [a0, a, noise_rms] {
        if !v.is_finite() {
            return Err(Error::Domain("trace parameters must be finite".into()));
        }
    }
    if noise_rms < 0.0 {
        return Err(Error::Domain("noise_rms must be >= 0".into()));
    }

    let mut groups: BTreeMap<u32, Vec<CpmgSequence>> = BTreeMap::new();
    for seq in seqs {
        groups.entry(seq.n_pulses).or_default().push(*seq);
    }

    let mut traces = Vec::with_capacity(groups.len());
    for (n, mut group) in groups {
        group.sort_by(|a, b| a.tau_s.partial_cmp(&b.tau_s).unwrap());
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(n as u64);
        let mut points = Vec::with_capacity(group.len());
        for seq in &group {
            let chi = coherence_exponent(psd, sensitivity, seq, cfg)?;
            let clean =
                a0 + a * (-chi).exp() * (-(seq.tau_s - seq.tau0_s) / t1_s).exp();
            let noise: f64 = rng.sample(StandardNormal);
            points.push(TracePoint {
                tau_s: seq.tau_s,
                signal: clean + noise_rms * noise,
            });
        }
        traces.push(CpmgTrace::new(
            n,
            points,
            t1_s,
            meta.qubit_id.clone(),
            meta.flux_phi0,
        )?);
    }
    Ok(traces)
}

/// Monte Carlo estimate of the coherence with bootstrap standard error.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct McCoherence {
    /// |mean of e^{i phi}| over trajectories.
    pub coherence: f64,
    /// Bootstrap standard error of the coherence.
    pub std_error: f64,
    /// Mean squared accumulated phase over the same trajectories.
    pub mean_sq_phase: f64,
    pub n_trajectories: usize,
    pub dt_s: f64,
    pub duration_s: f64,
}

/// Settings for the Monte Carlo oracle.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct McConfig {
    /// Trajectory duration; sets the infrared cutoff at 1/duration. When
    /// absent, 16 tau is used. Must match the chi integration's
    /// acquisition time for oracle comparisons.
    pub acquisition_time_s: Option<f64>,
    /// Time resolution: dt = tau / (oversample * N); must be >= 64.
    pub time_oversample: u32,
    /// Bootstrap resamples for the standard error.
    pub n_bootstrap: usize,
    /// Hard cap on samples per trajectory.
    pub max_samples: usize,
}

impl Default for McConfig {
    fn default() -> Self {
        Self {
            acquisition_time_s: None,
            time_oversample: 128,
            n_bootstrap: 200,
            max_samples: 1 << 22,
        }
    }
}

/// Time-domain Monte Carlo dephasing oracle: synthesizes flux-noise
/// trajectories, accumulates phase phi = D int_0^tau f(t) dPhi(t) dt along
/// the switching function, and reports |<e^{i phi}>|. Independent of the
/// filter-function integral it validates.
pub fn monte_carlo_coherence(
    psd: &PowerLawPsd,
    sensitivity: f64,
    seq: &CpmgSequence,
    n_trajectories: usize,
    seed: u64,
    cfg: &McConfig,
) -> Result<McCoherence> {
    psd.validate()?;
    if n_trajectories < 100 {
        return Err(Error::Domain(format!(
            "Monte Carlo needs >= 100 trajectories, got {n_trajectories}"
        )));
    }
    if cfg.time_oversample < 64 {
        return Err(Error::Domain(
            "time oversample must be >= 64 so dt <= tau / (64 N)".into(),
        ));
    }
    let tau = seq.tau_s;
    let duration = cfg.acquisition_time_s.unwrap_or(16.0 * tau);
    if duration < tau {
        return Err(Error::Domain(format!(
            "trajectory duration {duration} s shorter than the sequence ({tau} s)"
        )));
    }
    let dt_target = tau / (cfg.time_oversample as f64 * seq.n_pulses as f64);
    let n_samples = (duration / dt_target).ceil() as usize;
    let n_samples = n_samples.next_power_of_two();
    if n_samples > cfg.max_samples {
        return Err(Error::Resource(format!(
            "{n_samples} samples per trajectory exceed the cap of {}; \
             lower the oversample or the duration",
            cfg.max_samples
        )));
    }
    let dt = duration / n_samples as f64;

    // Interval boundaries of the switching function.
    let mut bounds = vec![0.0];
    bounds.extend(seq.flip_times());
    bounds.push(tau);

    let results: Vec<(f64, f64, f64)> = (0..n_trajectories)
        .into_par_iter()
        .map(|i| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(i as u64 + 1);
            let samples = synthesize_with_rng(psd, duration, dt, &mut rng)
                .expect("validated synthesis cannot fail");
            // Cumulative trapezoid of dPhi(t).
            let mut cum = Vec::with_capacity(samples.len());
            let mut acc = 0.0;
            cum.push(0.0);
            for w in samples.windows(2) {
                acc += 0.5 * dt * (w[0] + w[1]);
                cum.push(acc);
            }
            let integral_to = |t: f64| -> f64 {
                let u = t / dt;
                let m = (u.floor() as usize).min(cum.len() - 2);
                let frac = u - m as f64;
                cum[m] + frac * (cum[m + 1] - cum[m])
            };
            let mut phi = 0.0;
            for (j, w) in bounds.windows(2).enumerate() {
                let seg = integral_to(w[1]) - integral_to(w[0]);
                phi += if j % 2 == 0 { seg } else { -seg };
            }
            phi *= sensitivity;
            (phi.cos(), phi.sin(), phi * phi)
        })
        .collect();

    // Deterministic reduction in trajectory order.
    let inv = 1.0 / n_trajectories as f64;
    let (mut re, mut im, mut sq) = (0.0, 0.0, 0.0);
    for &(c, s, p2) in &results {
        re += c;
        im += s;
        sq += p2;
    }
    let coherence = (re * inv).hypot(im * inv);
    let mean_sq_phase = sq * inv;

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(u64::MAX);
    let mut boots = Vec::with_capacity(cfg.n_bootstrap);
    for _ in 0..cfg.n_bootstrap {
        let (mut bre, mut bim) = (0.0, 0.0);
        for _ in 0..n_trajectories {
            let k = rng.gen_range(0..n_trajectories);
            bre += results[k].0;
            bim += results[k].1;
        }
        boots.push((bre * inv).hypot(bim * inv));
    }
    let mean_b = boots.iter().sum::<f64>() / boots.len() as f64;
    let var_b = boots.iter().map(|b| (b - mean_b).powi(2)).sum::<f64>() / boots.len() as f64;

    Ok(McCoherence {
        coherence,
        std_error: var_b.sqrt(),
        mean_sq_phase,
        n_trajectories,
        dt_s: dt,
        duration_s: duration,
    })
}

struct TraceProblem<'a> {
    taus: &'a [f64],
    ys: &'a [f64],
    t1: f64,
    fit_tau0: bool,
    fixed_tau0: f64,
}

impl TraceProblem<'_> {
    fn unpack(&self, p: &[f64]) -> (f64, f64, f64, f64) {
        let tau0 = if self.fit_tau0 { p[3] } else { self.fixed_tau0 };
        (p[0], p[1], p[2], tau0)
    }

    fn envelope(&self, tau: f64, t2: f64, tau0: f64) -> f64 {
        let dt = tau - tau0;
        (-dt * dt / (2.0 * t2 * t2)).exp() * (-dt / self.t1).exp()
    }
}

impl LeastSquares for TraceProblem<'_> {
    fn residual_count(&self) -> usize {
        self.taus.len()
    }
    fn parameter_count(&self) -> usize {
        if self.fit_tau0 {
            4
        } else {
            3
        }
    }
    fn residuals(&self, p: &[f64], out: &mut DVector<f64>) {
        let (a0, a, t2, tau0) = self.unpack(p);
        for (i, (&tau, &y)) in self.taus.iter().zip(self.ys).enumerate() {
            out[i] = a0 + a * self.envelope(tau, t2, tau0) - y;
        }
    }
    fn jacobian(&self, p: &[f64], out: &mut DMatrix<f64>) {
        let (_a0, a, t2, tau0) = self.unpack(p);
        for (i, &tau) in self.taus.iter().enumerate() {
            let dt = tau - tau0;
            let env = self.envelope(tau, t2, tau0);
            out[(i, 0)] = 1.0;
            out[(i, 1)] = env;
            out[(i, 2)] = a * env * dt * dt / (t2 * t2 * t2);
            if self.fit_tau0 {
                out[(i, 3)] = a * env * (dt / (t2 * t2) + 1.0 / self.t1);
            }
        }
    }
}

/// Fit A0, A, T2 (and optionally tau0) to a raw trace with T1 held at the
/// independently measured value from the trace.
pub fn fit_trace(trace: &CpmgTrace, opts: &FitOptions) -> Result<TraceFit> {
    let taus: Vec<f64> = trace.points.iter().map(|p| p.tau_s).collect();
    let ys: Vec<f64> = trace.points.iter().map(|p| p.signal).collect();
    let scale = ys
        .iter()
        .fold(0.0f64, |m, &y| m.max(y.abs()))
        .max(f64::MIN_POSITIVE);

    let y_min = ys.iter().cloned().fold(f64::INFINITY, f64::min);
    let y_max = ys.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    if y_max - y_min <= 1e-12 * scale {
        return Err(Error::UnidentifiableT2(
            "signal is constant: no decay contrast to fit".into(),
        ));
    }

    // Initialization: offset from the tail, amplitude from the first point,
    // T2 from the half-contrast crossing.
    let tail_start = taus.len() - (taus.len() / 4).max(2);
    let mut tail: Vec<f64> = ys[tail_start..].to_vec();
    tail.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let a0_init = tail[tail.len() / 2];
    let a_init = ys[0] - a0_init;
    let half_level = a0_init + 0.5 * a_init;
    let t2_init = taus
        .iter()
        .zip(&ys)
        .find(|(_, &y)| {
            if a_init >= 0.0 {
                y <= half_level
            } else {
                y >= half_level
            }
        })
        .map(|(&tau, _)| tau)
        .unwrap_or(taus[taus.len() / 2]);

    let problem = TraceProblem {
        taus: &taus,
        ys: &ys,
        t1: trace.t1_s,
        fit_tau0: opts.fit_tau0,
        fixed_tau0: 0.0,
    };

    let mut init = vec![a0_init, a_init, t2_init];
    if opts.fit_tau0 {
        init.push(0.0);
    }

    // Deterministic multi-start perturbations.
    let perturbations: [(f64, f64, f64); 6] = [
        (1.0, 1.0, 1.0),
        (1.0, 1.0, 0.3),
        (1.0, 1.0, 3.0),
        (0.9, 1.3, 0.5),
        (1.1, 0.7, 2.0),
        (1.0, -1.0, 1.0),
    ];
    let lm_opts = LmOptions::default();
    let mut best: Option<lm::LmFit> = None;
    for (k, (fa0, fa, ft2)) in perturbations
        .iter()
        .take(1 + opts.restarts as usize)
        .enumerate()
    {
        let mut start = init.clone();
        start[0] *= fa0;
        start[1] *= fa;
        start[2] *= ft2;
        if start[2] == 0.0 {
            start[2] = taus[taus.len() / 2];
        }
        match lm::minimize(&problem, &start, &lm_opts) {
            Ok(fit) if fit.converged => {
                let better = best.as_ref().map_or(true, |b| fit.cost < b.cost);
                if better {
                    best = Some(fit);
                }
                // The base start converging is the normal path; restarts
                // only need to run when it did not.
                if k == 0 {
                    break;
                }
            }
            _ => {}
        }
    }
    let fit = best.ok_or_else(|| {
        Error::FitFailure(format!(
            "trace fit did not converge after {} starts (N = {}, {} points)",
            1 + opts.restarts,
            trace.n_pulses,
            taus.len()
        ))
    })?;

    let dof = (taus.len() - problem.parameter_count()).max(1);
    let residual_rms = (fit.cost / dof as f64).sqrt();
    let a0 = fit.params[0];
    let a = fit.params[1];
    let t2 = fit.params[2].abs();
    let tau0 = if opts.fit_tau0 { fit.params[3] } else { 0.0 };

    if a.abs() <= 3.0 * residual_rms.max(1e-14 * scale) {
        return Err(Error::UnidentifiableT2(format!(
            "fitted amplitude {a:.3e} is indistinguishable from noise \
             (residual RMS {residual_rms:.3e})"
        )));
    }

    // Range of points above the noise floor.
    let floor = opts.noise_floor_sigma * residual_rms / a.abs();
    let included: Vec<f64> = taus
        .iter()
        .zip(&ys)
        .filter(|(_, &y)| (y - a0) / a >= floor)
        .map(|(&tau, _)| tau)
        .collect();
    let included_range_s = match (included.first(), included.last()) {
        (Some(&lo), Some(&hi)) => Some((lo, hi)),
        _ => None,
    };

    Ok(TraceFit {
        a0,
        a,
        t2_s: t2,
        tau0_s: tau0,
        residual_rms,
        included_range_s,
    })
}
