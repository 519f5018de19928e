//! Dielectric loss budget: T1 limits from participation ratios and loss
//! tangents, loss-tangent fitting across designs, and T1-vs-frequency
//! curves with resonant loss channels.
//!
//! The smooth budget is additive in rates,
//!
//!   1/T1 = 2 pi f_q (p_ms tan d_ms + p_sa tan d_sa + p_ma tan d_ma
//!          + p_bulk tan d_bulk) + other_rate,
//!
//! and resonant channels add phenomenological Lorentzian rates on top.

use crate::error::{Error, Result};
use crate::math::nnls::nnls;
use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};
use std::f64::consts::TAU;

/// Bulk participations are expected to agree across designs to this
/// relative spread when a shared bulk tangent is fitted.
pub const BULK_SPREAD_TOLERANCE: f64 = 0.10;

/// Dielectric participation ratios for one qubit design.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ParticipationRow {
    pub design_id: String,
    /// Metal-substrate interface participation.
    pub p_ms: f64,
    /// Substrate-air interface participation.
    pub p_sa: f64,
    /// Metal-air interface participation.
    pub p_ma: f64,
    /// Bulk substrate participation.
    pub p_bulk: f64,
}

impl ParticipationRow {
    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("p_ms", self.p_ms),
            ("p_sa", self.p_sa),
            ("p_ma", self.p_ma),
            ("p_bulk", self.p_bulk),
        ] {
            if !(v > 0.0 && v < 1.0) {
                return Err(Error::Domain(format!(
                    "participation {name} = {v} for '{}' must lie in (0, 1)",
                    self.design_id
                )));
            }
        }
        Ok(())
    }
}

/// Table of participation rows keyed by design id.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct ParticipationTable {
    pub rows: Vec<ParticipationRow>,
}

impl ParticipationTable {
    pub fn new(rows: Vec<ParticipationRow>) -> Result<Self> {
        for row in &rows {
            row.validate()?;
        }
        Ok(Self { rows })
    }

    pub fn get(&self, design_id: &str) -> Option<&ParticipationRow> {
        self.rows.iter().find(|r| r.design_id == design_id)
    }

    /// Relative spread (max - min) / min of the bulk participations.
    pub fn bulk_spread(&self) -> f64 {
        let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
        for r in &self.rows {
            lo = lo.min(r.p_bulk);
            hi = hi.max(r.p_bulk);
        }
        if lo.is_finite() && lo > 0.0 {
            (hi - lo) / lo
        } else {
            f64::INFINITY
        }
    }
}

/// Lorentzian resonant loss channel.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ResonantChannel {
    pub freq_hz: f64,
    /// Added 1/T1 rate on resonance, 1/s.
    pub rate_peak_hz: f64,
    /// Full width at half maximum of the rate excess, Hz.
    pub linewidth_hz: f64,
}

impl ResonantChannel {
    pub fn validate(&self) -> Result<()> {
        if !(self.freq_hz > 0.0) || !(self.linewidth_hz > 0.0) || self.rate_peak_hz < 0.0 {
            return Err(Error::Domain(format!(
                "resonant channel must have positive frequency and linewidth \
                 and nonnegative rate: {self:?}"
            )));
        }
        Ok(())
    }

    /// Rate excess at frequency f, 1/s.
    pub fn rate_at(&self, f_hz: f64) -> f64 {
        let hw = 0.5 * self.linewidth_hz;
        self.rate_peak_hz * hw * hw / ((f_hz - self.freq_hz).powi(2) + hw * hw)
    }
}

/// Loss tangents plus residual and resonant channels.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LossModel {
    pub tan_delta_ms: f64,
    pub tan_delta_sa: f64,
    pub tan_delta_ma: f64,
    pub tan_delta_bulk: f64,
    /// Frequency-independent residual rate, 1/s.
    pub other_rate_hz: f64,
    #[serde(default)]
    pub resonant_channels: Vec<ResonantChannel>,
}

impl LossModel {
    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("tan_delta_ms", self.tan_delta_ms),
            ("tan_delta_sa", self.tan_delta_sa),
            ("tan_delta_ma", self.tan_delta_ma),
            ("tan_delta_bulk", self.tan_delta_bulk),
            ("other_rate_hz", self.other_rate_hz),
        ] {
            if !(v >= 0.0) || !v.is_finite() {
                return Err(Error::Domain(format!("{name} must be >= 0, got {v}")));
            }
        }
        for ch in &self.resonant_channels {
            ch.validate()?;
        }
        Ok(())
    }

    /// Smooth (non-resonant) decay rate at qubit frequency f_q, 1/s.
    pub fn smooth_rate(&self, parts: &ParticipationRow, f_q_hz: f64) -> f64 {
        TAU * f_q_hz
            * (parts.p_ms * self.tan_delta_ms
                + parts.p_sa * self.tan_delta_sa
                + parts.p_ma * self.tan_delta_ma
                + parts.p_bulk * self.tan_delta_bulk)
            + self.other_rate_hz
    }
}

/// Predicted T1 limit, s. Returns `f64::INFINITY` when the total rate is
/// zero (lossless model).
pub fn t1_limit(parts: &ParticipationRow, model: &LossModel, f_q_hz: f64) -> Result<f64> {
    if !(f_q_hz > 0.0) {
        return Err(Error::Domain(format!(
            "qubit frequency must be positive, got {f_q_hz}"
        )));
    }
    parts.validate()?;
    model.validate()?;
    let rate = model.smooth_rate(parts, f_q_hz);
    Ok(if rate > 0.0 { 1.0 / rate } else { f64::INFINITY })
}

/// One measured qubit for the loss-tangent fit.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct LossDatum {
    pub parts: ParticipationRow,
    pub t1_s: f64,
    pub f_q_hz: f64,
}

/// Which loss parameters are free in `fit_loss_tangents`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LossFitFlags {
    pub fit_ms: bool,
    pub fit_sa: bool,
    pub fit_ma: bool,
    pub fit_bulk: bool,
    pub fit_other_rate: bool,
}

impl Default for LossFitFlags {
    fn default() -> Self {
        // Two-mechanism model: MS surface plus bulk.
        Self {
            fit_ms: true,
            fit_sa: false,
            fit_ma: false,
            fit_bulk: true,
            fit_other_rate: false,
        }
    }
}

impl LossFitFlags {
    fn names(&self) -> Vec<&'static str> {
        let mut v = Vec::new();
        if self.fit_ms {
            v.push("tan_delta_ms");
        }
        if self.fit_sa {
            v.push("tan_delta_sa");
        }
        if self.fit_ma {
            v.push("tan_delta_ma");
        }
        if self.fit_bulk {
            v.push("tan_delta_bulk");
        }
        if self.fit_other_rate {
            v.push("other_rate_hz");
        }
        v
    }
}

/// Result of a loss-tangent fit.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct LossFit {
    pub model: LossModel,
    /// 1-sigma uncertainties in the same order as `parameter_names`.
    pub uncertainties: Vec<f64>,
    pub parameter_names: Vec<String>,
    /// Per-row rate residuals (measured - predicted), 1/s, in input order.
    pub residuals_hz: Vec<f64>,
    pub warnings: Vec<String>,
}

/// Nonnegative least squares on rates 1/T1 against participation vectors.
pub fn fit_loss_tangents(dataset: &[LossDatum], flags: &LossFitFlags) -> Result<LossFit> {
    let names = flags.names();
    let k = names.len();
    if k == 0 {
        return Err(Error::Domain("no free loss parameters requested".into()));
    }
    if dataset.len() < 2 {
        return Err(Error::Domain(format!(
            "loss fit needs at least 2 rows, got {}",
            dataset.len()
        )));
    }
    if dataset.len() < k {
        return Err(Error::Domain(format!(
            "{} rows cannot constrain {k} free parameters",
            dataset.len()
        )));
    }
    for d in dataset {
        d.parts.validate()?;
        if !(d.t1_s > 0.0) || !(d.f_q_hz > 0.0) {
            return Err(Error::Domain(format!(
                "row '{}': T1 and f_q must be positive",
                d.parts.design_id
            )));
        }
    }

    let mut warnings = Vec::new();
    if flags.fit_bulk {
        let table = ParticipationTable {
            rows: dataset.iter().map(|d| d.parts.clone()).collect(),
        };
        let spread = table.bulk_spread();
        if spread > BULK_SPREAD_TOLERANCE {
            warnings.push(format!(
                "bulk participations spread by {:.0}% across rows; a shared \
                 bulk tangent assumes they agree to within {:.0}%",
                spread * 100.0,
                BULK_SPREAD_TOLERANCE * 100.0
            ));
        }
    }

    let m = dataset.len();
    let mut design = DMatrix::zeros(m, k);
    let mut rates = DVector::zeros(m);
    for (i, d) in dataset.iter().enumerate() {
        rates[i] = 1.0 / d.t1_s;
        let w = TAU * d.f_q_hz;
        let mut col = 0;
        if flags.fit_ms {
            design[(i, col)] = w * d.parts.p_ms;
            col += 1;
        }
        if flags.fit_sa {
            design[(i, col)] = w * d.parts.p_sa;
            col += 1;
        }
        if flags.fit_ma {
            design[(i, col)] = w * d.parts.p_ma;
            col += 1;
        }
        if flags.fit_bulk {
            design[(i, col)] = w * d.parts.p_bulk;
            col += 1;
        }
        if flags.fit_other_rate {
            design[(i, col)] = 1.0;
        }
    }

    // Rank check with named null-space direction on failure.
    let svd = design.clone().svd(true, true);
    let s_max = svd.singular_values.max();
    let s_min = svd.singular_values.min();
    if !(s_max > 0.0) || s_min < 1e-10 * s_max {
        let v_t = svd.v_t.as_ref().expect("svd computed with vectors");
        let null_row = svd.singular_values.imin();
        let combo: Vec<String> = names
            .iter()
            .enumerate()
            .filter(|(j, _)| v_t[(null_row, *j)].abs() > 1e-6)
            .map(|(j, n)| format!("{:+.3} * {n}", v_t[(null_row, j)]))
            .collect();
        return Err(Error::Degeneracy(format!(
            "participation columns are linearly dependent; unidentifiable \
             combination: {}",
            combo.join(" ")
        )));
    }

    let (theta, passive) = nnls(&design, &rates)?;

    // Covariance on the passive (active-in-fit) set from the residual
    // variance; clamped-to-zero parameters get no uncertainty estimate.
    let residual = &rates - &design * &theta;
    let dof = m.saturating_sub(passive.len()).max(1);
    let sigma2 = residual.norm_squared() / dof as f64;
    let mut uncertainties = vec![f64::NAN; k];
    if !passive.is_empty() {
        let sub = design.select_columns(passive.iter());
        if let Some(cov) = (sub.transpose() * &sub).try_inverse() {
            for (idx, &j) in passive.iter().enumerate() {
                uncertainties[j] = (sigma2 * cov[(idx, idx)]).sqrt();
            }
        }
    }

    let mut model = LossModel::default();
    let mut col = 0;
    if flags.fit_ms {
        model.tan_delta_ms = theta[col];
        col += 1;
    }
    if flags.fit_sa {
        model.tan_delta_sa = theta[col];
        col += 1;
    }
    if flags.fit_ma {
        model.tan_delta_ma = theta[col];
        col += 1;
    }
    if flags.fit_bulk {
        model.tan_delta_bulk = theta[col];
        col += 1;
    }
    if flags.fit_other_rate {
        model.other_rate_hz = theta[col];
    }

    Ok(LossFit {
        model,
        uncertainties,
        parameter_names: names.iter().map(|s| s.to_string()).collect(),
        residuals_hz: residual.iter().copied().collect(),
        warnings,
    })
}

/// T1 across a frequency grid including resonant channels.
pub fn t1_vs_frequency(
    parts: &ParticipationRow,
    model: &LossModel,
    f_grid_hz: &[f64],
) -> Result<Vec<(f64, f64)>> {
    if f_grid_hz.is_empty() {
        return Err(Error::Domain("empty frequency grid".into()));
    }
    if f_grid_hz.windows(2).any(|w| w[0] >= w[1]) || !(f_grid_hz[0] > 0.0) {
        return Err(Error::Domain(
            "frequency grid must be positive and ascending".into(),
        ));
    }
    parts.validate()?;
    model.validate()?;
    Ok(f_grid_hz
        .iter()
        .map(|&f| {
            let rate = model.smooth_rate(parts, f)
                + model
                    .resonant_channels
                    .iter()
                    .map(|ch| ch.rate_at(f))
                    .sum::<f64>();
            (f, if rate > 0.0 { 1.0 / rate } else { f64::INFINITY })
        })
        .collect())
}
