//! Flux-noise spectral models and time-domain noise synthesis.
//!
//! The spectral model is a power law plus a white floor,
//! S(f) = A (f_pivot / f)^alpha + S_white, one-sided, per linear frequency,
//! in Phi0^2/Hz. Trajectories are produced by frequency-domain synthesis:
//! each FFT bin gets an independent Gaussian complex amplitude whose
//! expected power matches the target PSD, so the ensemble PSD is exact on
//! the synthesis grid. The DC bin is forced to zero and no power is placed
//! below 1/duration (infrared cutoff).

use crate::error::{Error, Result};
use crate::spectroscopy::{Provenance, PsdEstimate, PsdPoint};
use num_complex::Complex64;
use rand::prelude::*;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};

/// Power-law flux-noise PSD: `amplitude * (pivot_freq_hz / f)^alpha + white_floor`.
///
/// One-sided, per linear frequency, Phi0^2/Hz.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PowerLawPsd {
    /// PSD value contributed by the power-law term at the pivot, Phi0^2/Hz.
    pub amplitude: f64,
    /// Pivot frequency, Hz. Conventionally 1 Hz.
    pub pivot_freq_hz: f64,
    /// Power-law exponent, dimensionless, >= 0.
    pub alpha: f64,
    /// Frequency-independent floor, Phi0^2/Hz.
    pub white_floor: f64,
}

impl PowerLawPsd {
    pub fn new(amplitude: f64, pivot_freq_hz: f64, alpha: f64, white_floor: f64) -> Result<Self> {
        let psd = Self {
            amplitude,
            pivot_freq_hz,
            alpha,
            white_floor,
        };
        psd.validate()?;
        Ok(psd)
    }

    /// Pure power law with 1 Hz pivot and no floor.
    pub fn power_law(amplitude: f64, alpha: f64) -> Result<Self> {
        Self::new(amplitude, 1.0, alpha, 0.0)
    }

    /// Flat spectrum.
    pub fn white(level: f64) -> Result<Self> {
        Self::new(0.0, 1.0, 0.0, level)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.amplitude >= 0.0) || !self.amplitude.is_finite() {
            return Err(Error::Domain(format!(
                "PSD amplitude must be finite and >= 0, got {}",
                self.amplitude
            )));
        }
        if !(self.pivot_freq_hz > 0.0) || !self.pivot_freq_hz.is_finite() {
            return Err(Error::Domain(format!(
                "PSD pivot frequency must be finite and > 0, got {}",
                self.pivot_freq_hz
            )));
        }
        if !(self.alpha >= 0.0) || !self.alpha.is_finite() {
            return Err(Error::Domain(format!(
                "PSD exponent must be finite and >= 0, got {}",
                self.alpha
            )));
        }
        if !(self.white_floor >= 0.0) || !self.white_floor.is_finite() {
            return Err(Error::Domain(format!(
                "PSD white floor must be finite and >= 0, got {}",
                self.white_floor
            )));
        }
        Ok(())
    }

    /// One-sided PSD at frequency `f_hz` (> 0), in Phi0^2/Hz.
    pub fn eval(&self, f_hz: f64) -> Result<f64> {
        if !(f_hz > 0.0) {
            return Err(Error::Domain(format!(
                "PSD is defined for f > 0, got {f_hz}"
            )));
        }
        Ok(self.amplitude * (self.pivot_freq_hz / f_hz).powf(self.alpha) + self.white_floor)
    }

    /// One-sided PSD per angular frequency: S_w(w) = S_f(w / 2 pi) / (2 pi).
    pub fn eval_angular(&self, omega_rad_s: f64) -> Result<f64> {
        Ok(self.eval(omega_rad_s / std::f64::consts::TAU)? / std::f64::consts::TAU)
    }

    pub fn is_zero(&self) -> bool {
        self.amplitude == 0.0 && self.white_floor == 0.0
    }
}

/// A sampled flux-noise trajectory, delta-Phi in Phi0 at uniform spacing.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct NoiseTrajectory {
    /// Sample spacing, s.
    pub dt_s: f64,
    /// delta-Phi samples, Phi0.
    pub samples: Vec<f64>,
    /// Seed used to generate the trajectory.
    pub seed: u64,
}

impl NoiseTrajectory {
    pub fn new(dt_s: f64, samples: Vec<f64>, seed: u64) -> Result<Self> {
        if !(dt_s > 0.0) {
            return Err(Error::Domain(format!("dt must be > 0, got {dt_s}")));
        }
        if samples.len() < 2 {
            return Err(Error::Domain(format!(
                "trajectory needs at least 2 samples, got {}",
                samples.len()
            )));
        }
        Ok(Self { dt_s, samples, seed })
    }

    pub fn duration_s(&self) -> f64 {
        self.samples.len() as f64 * self.dt_s
    }

    pub fn sample_rate_hz(&self) -> f64 {
        1.0 / self.dt_s
    }
}

/// Synthesize a trajectory whose ensemble PSD equals `model` on the grid
/// f_k = k / duration, k = 1 .. n/2. Deterministic for a fixed seed.
pub fn synthesize_trajectory(
    model: &PowerLawPsd,
    duration_s: f64,
    dt_s: f64,
    seed: u64,
) -> Result<NoiseTrajectory> {
    if !(duration_s > 0.0) || !(dt_s > 0.0) {
        return Err(Error::Domain(
            "duration and dt must both be positive".into(),
        ));
    }
    if duration_s < 2.0 * dt_s {
        return Err(Error::Domain(format!(
            "duration {duration_s} s must be at least 2 dt = {} s",
            2.0 * dt_s
        )));
    }
    model.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let samples = synthesize_with_rng(model, duration_s, dt_s, &mut rng)?;
    NoiseTrajectory::new(dt_s, samples, seed)
}

/// Inner synthesis used by both the public entry point and the Monte Carlo
/// oracle (which manages per-trajectory RNG streams itself).
pub(crate) fn synthesize_with_rng(
    model: &PowerLawPsd,
    duration_s: f64,
    dt_s: f64,
    rng: &mut ChaCha8Rng,
) -> Result<Vec<f64>> {
    let n = (duration_s / dt_s).round() as usize;
    if n < 2 {
        return Err(Error::Domain("trajectory too short".into()));
    }
    if model.is_zero() {
        // Still consume no randomness: zero noise is exactly zero.
        return Ok(vec![0.0; n]);
    }

    let df = 1.0 / (n as f64 * dt_s);
    let half = n / 2;
    let mut spectrum = vec![Complex64::new(0.0, 0.0); n];

    for k in 1..half {
        let f_k = k as f64 * df;
        let sigma = (model.eval(f_k)? * df).sqrt();
        // Bin pair (k, n-k) built so the bin contributes variance sigma^2:
        // a_k cos + b_k sin with a, b ~ N(0, sigma^2).
        let a = sigma * rng.sample::<f64, _>(StandardNormal);
        let b = sigma * rng.sample::<f64, _>(StandardNormal);
        let half_n = 0.5 * n as f64;
        spectrum[k] = Complex64::new(half_n * a, -half_n * b);
        spectrum[n - k] = spectrum[k].conj();
    }
    if n % 2 == 0 && half >= 1 {
        // Nyquist bin is real-valued and self-conjugate.
        let f_nyq = half as f64 * df;
        let sigma = (model.eval(f_nyq)? * df).sqrt();
        spectrum[half] = Complex64::new(n as f64 * sigma * rng.sample::<f64, _>(StandardNormal), 0.0);
    }
    // DC stays exactly zero.

    let mut planner = FftPlanner::new();
    let ifft = planner.plan_fft_inverse(n);
    ifft.process(&mut spectrum);
    let inv_n = 1.0 / n as f64;
    Ok(spectrum.iter().map(|c| c.re * inv_n).collect())
}

/// Welch-averaged one-sided periodogram over non-overlapping rectangular
/// segments. Frequencies in Hz, density in Phi0^2/Hz.
pub fn periodogram(traj: &NoiseTrajectory, n_segments: usize) -> Result<PsdEstimate> {
    if n_segments < 1 {
        return Err(Error::Domain("need at least one segment".into()));
    }
    let seg_len = traj.samples.len() / n_segments;
    if seg_len < 16 {
        return Err(Error::Domain(format!(
            "trajectory too short: {} samples give segment length {} < 16",
            traj.samples.len(),
            seg_len
        )));
    }
    let fs = traj.sample_rate_hz();
    let df = fs / seg_len as f64;
    let half = seg_len / 2;

    let mut planner = FftPlanner::new();
    let fft = planner.plan_fft_forward(seg_len);
    let mut acc = vec![0.0f64; half + 1];
    let mut buf = vec![Complex64::new(0.0, 0.0); seg_len];
    for s in 0..n_segments {
        let seg = &traj.samples[s * seg_len..(s + 1) * seg_len];
        for (b, &x) in buf.iter_mut().zip(seg) {
            *b = Complex64::new(x, 0.0);
        }
        fft.process(&mut buf);
        let scale = 1.0 / (fs * seg_len as f64);
        for k in 0..=half {
            let p = buf[k].norm_sqr() * scale;
            // One-sided: double interior bins, keep DC and Nyquist single.
            let one_sided = if k == 0 || (seg_len % 2 == 0 && k == half) {
                p
            } else {
                2.0 * p
            };
            acc[k] += one_sided;
        }
    }
    let inv = 1.0 / n_segments as f64;
    let rel_sigma = 1.0 / (n_segments as f64).sqrt();
    // Drop the DC bin: PSD points are defined at f > 0.
    let points = (1..=half)
        .map(|k| {
            let s = acc[k] * inv;
            PsdPoint {
                freq_hz: k as f64 * df,
                s_phi: s,
                sigma: s * rel_sigma,
            }
        })
        .collect();
    Ok(PsdEstimate {
        points,
        provenance: Provenance {
            qubit_id: None,
            flux_phi0: None,
            n_pulses: Vec::new(),
        },
    })
}
