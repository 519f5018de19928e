//! Flux-to-frequency transduction for tunable SQUID transmons.
//!
//! Two sources for the qubit frequency and its flux sensitivity
//! d(omega_q)/d(Phi): a parametric asymmetric-SQUID transmon model, or an
//! empirical flux-tuning curve interpolated with a natural cubic spline.

use crate::error::{Error, Result};
use crate::math::spline::CubicSpline;
use serde::{Deserialize, Serialize};
use std::f64::consts::{PI, TAU};

/// Effective E_J below this multiple of E_C invalidates the dispersive
/// transmon frequency formula.
pub const DEGENERATE_EJ_EC_RATIO: f64 = 1.0;

/// Below this E_J-sum/E_C ratio the device is no longer comfortably in the
/// transmon regime; flagged but not rejected.
pub const TRANSMON_REGIME_RATIO: f64 = 20.0;

/// Number of samples excluded at each end of a tuning curve for
/// sensitivity queries.
const CURVE_EDGE_MARGIN: usize = 2;

/// Parametric SQUID transmon: f_q = sqrt(8 E_J(Phi) E_C) - E_C, with
/// E_J(Phi) = ej_sum * sqrt(cos^2(pi Phi) + d^2 sin^2(pi Phi)).
/// Energies are in Hz (E/h); flux in Phi0.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TransmonModel {
    /// Total Josephson energy E_J-sigma / h, Hz.
    pub ej_sum_hz: f64,
    /// Charging energy E_C / h, Hz.
    pub ec_hz: f64,
    /// Junction asymmetry d in [0, 1).
    pub asymmetry: f64,
    /// Flux offset, Phi0.
    pub flux_offset_phi0: f64,
}

impl TransmonModel {
    pub fn new(ej_sum_hz: f64, ec_hz: f64, asymmetry: f64, flux_offset_phi0: f64) -> Result<Self> {
        let model = Self {
            ej_sum_hz,
            ec_hz,
            asymmetry,
            flux_offset_phi0,
        };
        model.validate()?;
        Ok(model)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.ej_sum_hz > 0.0) || !(self.ec_hz > 0.0) {
            return Err(Error::Domain(
                "transmon energies must be positive".into(),
            ));
        }
        if !(0.0..1.0).contains(&self.asymmetry) {
            return Err(Error::Domain(format!(
                "asymmetry d must lie in [0, 1), got {}",
                self.asymmetry
            )));
        }
        if !self.flux_offset_phi0.is_finite() {
            return Err(Error::Domain("flux offset must be finite".into()));
        }
        Ok(())
    }

    /// True when E_J-sigma / E_C >= 20.
    pub fn in_transmon_regime(&self) -> bool {
        self.ej_sum_hz / self.ec_hz >= TRANSMON_REGIME_RATIO
    }

    /// Effective Josephson energy at the given external flux, Hz.
    pub fn effective_ej_hz(&self, flux_phi0: f64) -> f64 {
        let phi = PI * (flux_phi0 - self.flux_offset_phi0);
        let (s, c) = phi.sin_cos();
        self.ej_sum_hz * (c * c + self.asymmetry * self.asymmetry * s * s).sqrt()
    }

    /// Qubit transition frequency, Hz.
    pub fn qubit_freq_hz(&self, flux_phi0: f64) -> Result<f64> {
        let ej = self.effective_ej_hz(flux_phi0);
        if ej <= DEGENERATE_EJ_EC_RATIO * self.ec_hz {
            return Err(Error::DegenerateRegime {
                ej_hz: ej,
                ec_hz: self.ec_hz,
                threshold: DEGENERATE_EJ_EC_RATIO,
            });
        }
        Ok((8.0 * ej * self.ec_hz).sqrt() - self.ec_hz)
    }

    /// Analytic d(omega_q)/d(Phi), rad/s per Phi0.
    pub fn flux_sensitivity(&self, flux_phi0: f64) -> Result<f64> {
        let ej = self.effective_ej_hz(flux_phi0);
        if ej <= DEGENERATE_EJ_EC_RATIO * self.ec_hz {
            return Err(Error::DegenerateRegime {
                ej_hz: ej,
                ec_hz: self.ec_hz,
                threshold: DEGENERATE_EJ_EC_RATIO,
            });
        }
        let phi = PI * (flux_phi0 - self.flux_offset_phi0);
        let d2 = self.asymmetry * self.asymmetry;
        let (s, c) = phi.sin_cos();
        let u = c * c + d2 * s * s;
        // du/dPhi = -pi (1 - d^2) sin(2 pi Phi); dEJ/dPhi = ej_sum du / (2 sqrt u)
        let du = -PI * (1.0 - d2) * 2.0 * s * c;
        let dej = self.ej_sum_hz * du / (2.0 * u.sqrt());
        // d f_q / dPhi = sqrt(2 E_C / E_J) * dEJ/dPhi ... from f = sqrt(8 EJ EC) - EC
        let dfq = (2.0 * self.ec_hz / ej).sqrt() * dej;
        Ok(TAU * dfq)
    }
}

/// Measured flux-tuning curve (flux in Phi0, frequency in Hz), interpolated
/// with a natural cubic spline.
#[derive(Debug, Clone)]
pub struct FluxTuningCurve {
    spline: CubicSpline,
    freqs: Vec<f64>,
}

impl FluxTuningCurve {
    /// Points must have strictly increasing flux, positive frequencies,
    /// and at least 4 entries.
    pub fn new(points: &[(f64, f64)]) -> Result<Self> {
        if points.len() < 4 {
            return Err(Error::Domain(format!(
                "tuning curve needs at least 4 points, got {}",
                points.len()
            )));
        }
        if points.windows(2).any(|w| w[0].0 >= w[1].0) {
            return Err(Error::Domain(
                "tuning curve flux values must be strictly increasing".into(),
            ));
        }
        if points.iter().any(|p| !(p.1 > 0.0) || !p.1.is_finite()) {
            return Err(Error::Domain(
                "tuning curve frequencies must be positive and finite".into(),
            ));
        }
        let x: Vec<f64> = points.iter().map(|p| p.0).collect();
        let y: Vec<f64> = points.iter().map(|p| p.1).collect();
        Ok(Self {
            spline: CubicSpline::new(x, y.clone())?,
            freqs: y,
        })
    }

    /// Interpolated qubit frequency, Hz. Valid on the full knot range.
    pub fn qubit_freq_hz(&self, flux_phi0: f64) -> Result<f64> {
        self.spline.eval(flux_phi0)
    }

    /// Flux range over which sensitivity queries are allowed (a 2-sample
    /// margin inside the tabulated range, for derivative accuracy).
    pub fn sensitivity_domain(&self) -> (f64, f64) {
        let knots = self.spline.knots();
        (
            knots[CURVE_EDGE_MARGIN],
            knots[knots.len() - 1 - CURVE_EDGE_MARGIN],
        )
    }

    /// Spline-derivative d(omega_q)/d(Phi), rad/s per Phi0.
    pub fn flux_sensitivity(&self, flux_phi0: f64) -> Result<f64> {
        let (lo, hi) = self.sensitivity_domain();
        if flux_phi0 < lo || flux_phi0 > hi {
            return Err(Error::Extrapolation {
                flux_phi0,
                min_phi0: lo,
                max_phi0: hi,
            });
        }
        Ok(TAU * self.spline.derivative(flux_phi0)?)
    }

    pub fn points(&self) -> impl Iterator<Item = (f64, f64)> + '_ {
        self.spline
            .knots()
            .iter()
            .copied()
            .zip(self.freqs.iter().copied())
    }
}

/// Either transduction source behind one interface.
#[derive(Debug, Clone)]
pub enum Transduction {
    Model(TransmonModel),
    Curve(FluxTuningCurve),
}

impl Transduction {
    pub fn qubit_freq_hz(&self, flux_phi0: f64) -> Result<f64> {
        match self {
            Transduction::Model(m) => m.qubit_freq_hz(flux_phi0),
            Transduction::Curve(c) => c.qubit_freq_hz(flux_phi0),
        }
    }

    /// d(omega_q)/d(Phi) in rad/s per Phi0.
    pub fn flux_sensitivity(&self, flux_phi0: f64) -> Result<f64> {
        match self {
            Transduction::Model(m) => m.flux_sensitivity(flux_phi0),
            Transduction::Curve(c) => c.flux_sensitivity(flux_phi0),
        }
    }
}
