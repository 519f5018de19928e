//! CPMG switching functions, filter functions, and the rectangular
//! approximation used for PSD inversion.
//!
//! A CPMG sequence with N pi pulses over total free evolution tau toggles
//! the switching function f(t) = +-1 at t_j = (j - 1/2) tau / N. The filter
//! function is
//!
//!   g_N(omega, tau) = | int_0^tau f(t) e^{i omega t} dt |^2 / tau^2,
//!
//! evaluated by the closed sum over the N+1 constant-sign intervals with
//! ideal zero-width pulses. g depends on (omega, tau) only through the
//! product x = omega * tau at fixed N, which the rectangular approximation
//! exploits: peak location scales as 1/tau and width as 1/tau.

use crate::error::{Error, Result};
use crate::math::golden;
use crate::math::quad;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

/// Relative tolerance for the equal-area width quadrature.
pub const RECT_AREA_REL_TOL: f64 = 1e-4;
/// Upper integration limit for the filter area, in units of pi N / tau.
pub const RECT_AREA_OMEGA_FACTOR: f64 = 40.0;
/// Coarse peak-scan step in x = omega * tau.
const PEAK_SCAN_STEP: f64 = PI / 8.0;

/// A CPMG sequence: N pi pulses across total free evolution time tau.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CpmgSequence {
    /// Number of pi pulses, >= 1.
    pub n_pulses: u32,
    /// Total free evolution time, s.
    pub tau_s: f64,
    /// Fit origin offset, s.
    #[serde(default)]
    pub tau0_s: f64,
}

impl CpmgSequence {
    pub fn new(n_pulses: u32, tau_s: f64) -> Result<Self> {
        Self::with_origin(n_pulses, tau_s, 0.0)
    }

    pub fn with_origin(n_pulses: u32, tau_s: f64, tau0_s: f64) -> Result<Self> {
        if n_pulses < 1 {
            return Err(Error::Domain("CPMG needs at least one pi pulse".into()));
        }
        if !(tau_s > 0.0) || !tau_s.is_finite() {
            return Err(Error::Domain(format!("tau must be positive, got {tau_s}")));
        }
        if !tau0_s.is_finite() {
            return Err(Error::Domain("tau0 must be finite".into()));
        }
        Ok(Self {
            n_pulses,
            tau_s,
            tau0_s,
        })
    }

    /// Pi-pulse times t_j = (j - 1/2) tau / N, j = 1..N.
    pub fn flip_times(&self) -> Vec<f64> {
        (1..=self.n_pulses)
            .map(|j| (j as f64 - 0.5) * self.tau_s / self.n_pulses as f64)
            .collect()
    }

    /// Switching function value at time `t`: starts at +1 and flips sign at
    /// each pulse; the value at a flip time is the post-flip value.
    pub fn switching_function(&self, t: f64) -> Result<f64> {
        if t < 0.0 || t > self.tau_s {
            return Err(Error::Domain(format!(
                "switching function defined on [0, {}], got {t}",
                self.tau_s
            )));
        }
        let flips = (t * self.n_pulses as f64 / self.tau_s + 0.5).floor() as u64;
        Ok(if flips % 2 == 0 { 1.0 } else { -1.0 })
    }

    /// Filter function g_N(omega, tau), dimensionless.
    pub fn filter_function(&self, omega_rad_s: f64) -> f64 {
        debug_assert!(omega_rad_s >= 0.0);
        filter_shape(self.n_pulses, omega_rad_s.abs() * self.tau_s)
    }

    /// Equal-height, equal-area rectangle replacing the filter main lobe.
    pub fn rectangular_approximation(&self) -> Result<RectFilter> {
        let unit = unit_rectangle(self.n_pulses)?;
        Ok(unit.scaled(self.tau_s))
    }
}

/// Dimensionless filter shape as a function of x = omega * tau.
///
/// Each constant-sign interval [a, b] contributes
/// s * e^{i a} * (e^{i (b-a)} - 1), accumulated with a phase-rotation
/// recurrence; the 1/(i omega) factor and tau^2 normalization reduce to
/// dividing |sum|^2 by x^2.
pub fn filter_shape(n_pulses: u32, x: f64) -> f64 {
    if x == 0.0 {
        return 0.0;
    }
    let n = n_pulses as f64;
    let half = x / (2.0 * n);
    let (sin_half, cos_half) = half.sin_cos();
    let sh2 = (0.5 * half).sin();
    // e^{i half} - 1 computed without cancellation: (-2 sin^2(half/2), sin half)
    let jump_half = (-2.0 * sh2 * sh2, sin_half);
    let (sin_full, cos_full) = (x / n).sin_cos();
    let sf2 = half.sin();
    let jump_full = (-2.0 * sf2 * sf2, sin_full);

    // Rotation by one half interval and one full interval.
    let rot_half = (cos_half, sin_half);
    let rot_full = (cos_full, sin_full);

    let mul = |a: (f64, f64), b: (f64, f64)| (a.0 * b.0 - a.1 * b.1, a.0 * b.1 + a.1 * b.0);

    let mut sum = (0.0f64, 0.0f64);
    let mut rot = (1.0f64, 0.0f64);
    let mut sign = 1.0f64;
    let n_intervals = n_pulses as usize + 1;
    for j in 0..n_intervals {
        let first_or_last = j == 0 || j == n_intervals - 1;
        let jump = if first_or_last { jump_half } else { jump_full };
        let term = mul(rot, jump);
        sum.0 += sign * term.0;
        sum.1 += sign * term.1;
        rot = mul(rot, if first_or_last { rot_half } else { rot_full });
        sign = -sign;
    }
    (sum.0 * sum.0 + sum.1 * sum.1) / (x * x)
}

/// Rectangular stand-in for the filter function: same height as the main
/// lobe peak and width chosen so height * width equals the full area.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RectFilter {
    /// Main-lobe peak position, rad/s.
    pub omega_c_rad_s: f64,
    /// Peak filter value, dimensionless.
    pub height: f64,
    /// Equal-area width, rad/s.
    pub width_rad_s: f64,
}

impl RectFilter {
    /// Area covered by the rectangle (equals the filter area by construction).
    pub fn area(&self) -> f64 {
        self.height * self.width_rad_s
    }
}

/// Rectangle parameters computed at tau = 1 in x = omega * tau units.
#[derive(Debug, Clone, Copy)]
pub(crate) struct UnitRectangle {
    pub x_peak: f64,
    pub height: f64,
    pub width_x: f64,
}

impl UnitRectangle {
    pub fn scaled(&self, tau_s: f64) -> RectFilter {
        RectFilter {
            omega_c_rad_s: self.x_peak / tau_s,
            height: self.height,
            width_rad_s: self.width_x / tau_s,
        }
    }
}

/// Locate the filter peak and the equal-area width in scale-free units.
pub(crate) fn unit_rectangle(n_pulses: u32) -> Result<UnitRectangle> {
    let n = n_pulses as f64;
    let g = |x: f64| filter_shape(n_pulses, x);

    // Coarse scan over (0, 4 pi N], then golden-section refinement.
    let x_max_scan = 4.0 * PI * n;
    let steps = (x_max_scan / PEAK_SCAN_STEP).ceil() as usize;
    let mut best_i = 1;
    let mut best_g = f64::MIN;
    for i in 1..=steps {
        let x = i as f64 * PEAK_SCAN_STEP;
        let v = g(x);
        if v > best_g {
            best_g = v;
            best_i = i;
        }
    }
    let lo = (best_i as f64 - 1.0) * PEAK_SCAN_STEP;
    let hi = (best_i as f64 + 1.0) * PEAK_SCAN_STEP;
    let (x_peak, height) = golden::maximize(g, lo.max(f64::MIN_POSITIVE), hi, 1e-12);

    // Equal-area width: integrate to 40 pi N and add the analytic sidelobe
    // tail bound. Beyond x_max the filter is a sum of 2N + 2 jump terms of
    // magnitude 2/x each, so the mean of |sum|^2 is (4N + 2) and the tail
    // integrates to (4N + 2) / x_max.
    // Panels no wider than one oscillation period (2 pi in x), so the
    // Gauss-Kronrod error estimates stay trustworthy on the sidelobes.
    let x_area_max = RECT_AREA_OMEGA_FACTOR * PI * n;
    let mut edges: Vec<f64> = Vec::new();
    let mut x = 0.0;
    while x < 8.0 * PI * n {
        edges.push(x);
        x += PI;
    }
    while x < x_area_max {
        edges.push(x);
        x += 2.0 * PI;
    }
    edges.push(x_area_max);
    let area = quad::integrate(g, &edges, RECT_AREA_REL_TOL, 100_000).map_err(|e| {
        Error::Numerical(format!(
            "filter area quadrature failed for N = {n_pulses}: {e}"
        ))
    })?;
    let tail = (4.0 * n + 2.0) / x_area_max;
    let total_area = area.value + tail;

    Ok(UnitRectangle {
        x_peak,
        height,
        width_x: total_area / height,
    })
}
