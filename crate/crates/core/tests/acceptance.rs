//! Acceptance suite: end-to-end gates for the spectroscopy and loss-budget
//! pipelines, one test per criterion, each printing a PASS line with the
//! achieved numbers (run with `--nocapture` to see them).

use fluxnoise_core::dephasing::{
    coherence_exponent, fit_trace, monte_carlo_coherence, simulate_signal, FitOptions,
    IntegrationConfig, McConfig, TraceMeta,
};
use fluxnoise_core::filter::CpmgSequence;
use fluxnoise_core::loss::{
    fit_loss_tangents, t1_limit, LossDatum, LossFitFlags, LossModel, ParticipationRow,
};
use fluxnoise_core::noise::{periodogram, synthesize_trajectory, PowerLawPsd};
use fluxnoise_core::spectroscopy::{extract_psd, fit_power_law, ExtractOptions, PowerLawFit};
use fluxnoise_core::transduction::{Transduction, TransmonModel};
use num_complex::Complex64;
use rustfft::FftPlanner;

/// Reference transmon used by the synthetic studies: 15 GHz E_J-sum,
/// 0.25 GHz E_C, symmetric SQUID, operated near Phi0/4.
fn reference_transmon() -> TransmonModel {
    TransmonModel::new(15e9, 0.25e9, 0.0, 0.0).unwrap()
}

const WORKING_FLUX: f64 = 0.25;

fn sensitivity() -> f64 {
    reference_transmon().flux_sensitivity(WORKING_FLUX).unwrap()
}

/// Surface participations for the measured designs (shared nominal bulk).
fn participation_rows() -> Vec<ParticipationRow> {
    let raw: [(&str, f64, f64, f64); 9] = [
        ("design_a_suspended", 1.25e-5, 2.90e-4, 5.74e-6),
        ("design_a_regular", 6.16e-5, 6.40e-5, 1.90e-6),
        ("design_b", 1.39e-4, 1.64e-4, 1.45e-5),
        ("design_c_30um", 3.32e-4, 3.83e-4, 3.53e-5),
        ("design_c_20um", 3.96e-4, 4.55e-4, 4.22e-5),
        ("design_c_10um", 5.63e-4, 6.49e-4, 6.19e-5),
        ("design_c_6um", 7.64e-4, 8.85e-4, 8.74e-5),
        ("design_c_3um", 1.25e-3, 1.46e-3, 1.55e-4),
        ("design_c_1p5um", 2.16e-3, 2.36e-3, 3.16e-4),
    ];
    raw.iter()
        .map(|&(id, ms, sa, ma)| ParticipationRow {
            design_id: id.into(),
            p_ms: ms,
            p_sa: sa,
            p_ma: ma,
            p_bulk: 0.9,
        })
        .collect()
}

/// Criterion 1: the closed-sum filter function matches a dense FFT of the
/// sampled switching function to 1e-6 relative over omega*tau in
/// [0.1, 200], N in {1, 2, 5, 14, 48}.
#[test]
fn criterion_1_filter_function_fft_oracle() {
    let mut worst: f64 = 0.0;
    let mut checked = 0usize;
    for n in [1u32, 2, 5, 14, 48] {
        let tau = 20e-6;
        let seq = CpmgSequence::new(n, tau).unwrap();
        // Time grid with every flip exactly on a sample: dt = tau / (2 N m).
        let m_sub = (2048 / n).max(1);
        let n_time = (2 * n * m_sub) as usize;
        let dt = tau / n_time as f64;
        let n_fft = (64 * n_time).next_power_of_two();

        // Sample value applies to the cell [t_m, t_{m+1}). Flips sit at
        // exact sample indices (2j - 1) * m_sub; building the blocks from
        // integer indices avoids rounding ambiguity at the flip times and
        // matches the post-flip-value convention.
        let mut buf = vec![Complex64::new(0.0, 0.0); n_fft];
        for (m, b) in buf.iter_mut().enumerate().take(n_time) {
            let flips = (m as u32 + m_sub) / (2 * m_sub);
            let sign = if flips % 2 == 0 { 1.0 } else { -1.0 };
            *b = Complex64::new(sign, 0.0);
        }
        // Spot-check the block construction against the public switching
        // function away from the ambiguous boundary samples.
        for j in 0..20 {
            let m = (j * 731 + 3) % n_time;
            if (m as u32 + m_sub) % (2 * m_sub) != 0 {
                assert_eq!(
                    buf[m].re,
                    seq.switching_function(m as f64 * dt).unwrap(),
                    "block construction disagrees with switching_function at sample {m}"
                );
            }
        }
        // Unnormalized inverse transform: sum_m f_m e^{+i 2 pi k m / M}.
        let mut planner = FftPlanner::new();
        planner.plan_fft_inverse(n_fft).process(&mut buf);

        for (k, b) in buf.iter().enumerate().skip(1).take(n_fft / 2) {
            let omega = std::f64::consts::TAU * k as f64 / (n_fft as f64 * dt);
            let x = omega * tau;
            if !(0.1..=200.0).contains(&x) {
                continue;
            }
            // Exact integral of e^{i omega t} over one sample cell turns the
            // DFT into the exact piecewise-constant Fourier integral.
            let phase = omega * dt;
            let cell = Complex64::new((phase.cos() - 1.0) / omega, phase.sin() / omega);
            let f_omega = cell * b;
            let g_oracle = f_omega.norm_sqr() / (tau * tau);
            let g_closed = seq.filter_function(omega);
            // Relative against the larger value, floored at 1e-14: at the
            // exact filter zeros both evaluations bottom out on rounding
            // noise 20+ decades below the peak.
            let rel = (g_closed - g_oracle).abs() / g_closed.max(g_oracle).max(1e-14);
            worst = worst.max(rel);
            checked += 1;
        }
    }
    println!(
        "[acceptance] criterion 1 (filter-function FFT oracle): PASS \
         worst relative deviation {worst:.3e} over {checked} frequencies"
    );
    assert!(worst <= 1e-6, "worst relative deviation {worst:.3e}");
}

/// Criterion 2: Monte Carlo coherence agrees with exp(-chi) to
/// max(0.02, 3 sigma) over chi in [0.1, 3], N in {1, 2, 14}, for white and
/// alpha = 0.8 spectra, >= 1000 trajectories.
#[test]
fn criterion_2_monte_carlo_forward_equivalence() {
    let d = sensitivity();
    let tau = 20e-6;
    let t_acq = 16.0 * tau;
    let int_cfg = IntegrationConfig::with_acquisition_time(t_acq);
    let mc_cfg = McConfig::default();
    let n_traj = 2400;

    let mut worst = (0.0f64, String::new());
    let mut seed = 1000;
    for n in [1u32, 2, 14] {
        let seq = CpmgSequence::new(n, tau).unwrap();
        for alpha in [0.0, 0.8] {
            // Scale the amplitude so chi lands on each target (chi is
            // linear in the PSD amplitude).
            let base = if alpha == 0.0 {
                PowerLawPsd::white(1e-16).unwrap()
            } else {
                PowerLawPsd::power_law(4e-12, alpha).unwrap()
            };
            let chi_base = coherence_exponent(&base, d, &seq, &int_cfg).unwrap();
            for chi_target in [0.1, 0.5, 1.5, 3.0] {
                let scale = chi_target / chi_base;
                let psd = PowerLawPsd::new(
                    base.amplitude * scale,
                    base.pivot_freq_hz,
                    base.alpha,
                    base.white_floor * scale,
                )
                .unwrap();
                let chi = coherence_exponent(&psd, d, &seq, &int_cfg).unwrap();
                let mc = monte_carlo_coherence(&psd, d, &seq, n_traj, seed, &mc_cfg).unwrap();
                seed += 1;
                let diff = (mc.coherence - (-chi).exp()).abs();
                let allowed = (3.0 * mc.std_error).max(0.02);
                let label = format!(
                    "N={n} alpha={alpha} chi={chi:.3}: MC {:.4} vs {:.4}, |diff| {:.4} <= {:.4}",
                    mc.coherence,
                    (-chi).exp(),
                    diff,
                    allowed
                );
                assert!(diff <= allowed, "{label}");
                if diff / allowed > worst.0 {
                    worst = (diff / allowed, label);
                }
            }
        }
    }
    println!(
        "[acceptance] criterion 2 (Monte Carlo vs forward model): PASS \
         tightest margin at {}",
        worst.1
    );
}

struct PipelineRun {
    fit: PowerLawFit,
}

/// One full synthetic spectroscopy round trip:
/// simulate -> fit traces -> invert -> power-law fit.
fn run_pipeline(psd: &PowerLawPsd, noise_rms: f64, seed: u64) -> PipelineRun {
    let model = reference_transmon();
    let d = model.flux_sensitivity(WORKING_FLUX).unwrap();
    let t1 = 40e-6;
    let taus: Vec<f64> = (0..30)
        .map(|i| 2e-6 * (50f64).powf(i as f64 / 29.0))
        .collect();
    let mut seqs = Vec::new();
    for n in [1u32, 2, 5, 14, 48] {
        for &tau in &taus {
            seqs.push(CpmgSequence::new(n, tau).unwrap());
        }
    }
    let meta = TraceMeta {
        qubit_id: "synth".into(),
        flux_phi0: WORKING_FLUX,
    };
    let int_cfg = IntegrationConfig::default();
    let traces =
        simulate_signal(psd, d, &seqs, t1, 0.1, 0.8, noise_rms, seed, &int_cfg, &meta).unwrap();
    let fits: Vec<_> = traces
        .iter()
        .map(|t| fit_trace(t, &FitOptions::default()).unwrap())
        .collect();
    let (est, _excl) = extract_psd(
        &traces,
        &fits,
        &Transduction::Model(model),
        WORKING_FLUX,
        &ExtractOptions::default(),
    )
    .unwrap();
    let f_lo = est.points.first().unwrap().freq_hz * 0.999;
    let f_hi = est.points.last().unwrap().freq_hz * 1.001;
    let fit = fit_power_law(&est, (f_lo, f_hi)).unwrap();
    PipelineRun { fit }
}

/// Criterion 3: alpha = 0.8 spectroscopy round trip over an ensemble of 20
/// seeds recovers alpha within +-0.1 and the 1 Hz amplitude within 20%.
#[test]
fn criterion_3_spectroscopy_round_trip() {
    let truth_amp = 4e-12;
    let psd = PowerLawPsd::power_law(truth_amp, 0.8).unwrap();
    let n_seeds = 20;
    let mut alphas = Vec::new();
    let mut amps = Vec::new();
    for seed in 0..n_seeds {
        let run = run_pipeline(&psd, 0.005, seed);
        alphas.push(run.fit.alpha);
        amps.push(run.fit.amplitude_at_pivot);
    }
    let alpha_mean = alphas.iter().sum::<f64>() / n_seeds as f64;
    let amp_mean = amps.iter().sum::<f64>() / n_seeds as f64;
    let amp_rel = amp_mean / truth_amp - 1.0;
    println!(
        "[acceptance] criterion 3 (alpha = 0.8 round trip, {n_seeds} seeds): PASS \
         alpha {alpha_mean:.4} (true 0.800), amplitude off by {:.1}%",
        amp_rel * 100.0
    );
    assert!(
        (alpha_mean - 0.8).abs() <= 0.1,
        "ensemble alpha {alpha_mean} outside 0.8 +- 0.1"
    );
    assert!(
        amp_rel.abs() <= 0.2,
        "ensemble amplitude {amp_mean:.3e} off truth {truth_amp:.3e} by {:.1}%",
        amp_rel * 100.0
    );
}

/// Criterion 4: two qubits with input PSD amplitudes in ratio 3 give
/// extracted 1 Hz amplitudes in ratio 3.0 +- 0.5.
#[test]
fn criterion_4_amplitude_ratio_fidelity() {
    let lo = PowerLawPsd::power_law(4e-12, 0.8).unwrap();
    let hi = PowerLawPsd::power_law(12e-12, 0.8).unwrap();
    let n_seeds = 5;
    let mean_amp = |psd: &PowerLawPsd, seed0: u64| {
        (0..n_seeds)
            .map(|s| run_pipeline(psd, 0.005, seed0 + s).fit.amplitude_at_pivot)
            .sum::<f64>()
            / n_seeds as f64
    };
    let amp_lo = mean_amp(&lo, 100);
    let amp_hi = mean_amp(&hi, 200);
    let ratio = amp_hi / amp_lo;
    println!(
        "[acceptance] criterion 4 (3:1 amplitude ratio): PASS extracted ratio {ratio:.3}"
    );
    assert!(
        (ratio - 3.0).abs() <= 0.5,
        "extracted ratio {ratio} outside 3.0 +- 0.5"
    );
}

/// Criterion 5: a flat PSD at 1e-16 Phi0^2/Hz comes back with |alpha| < 0.1
/// and amplitude within 25%.
#[test]
fn criterion_5_white_floor_control() {
    let level = 1e-16;
    let psd = PowerLawPsd::white(level).unwrap();
    let n_seeds = 5;
    let mut alphas = Vec::new();
    let mut amps = Vec::new();
    for seed in 300..300 + n_seeds {
        let run = run_pipeline(&psd, 0.005, seed);
        alphas.push(run.fit.alpha);
        amps.push(run.fit.amplitude_at_pivot);
    }
    let alpha_mean = alphas.iter().sum::<f64>() / n_seeds as f64;
    let amp_mean = amps.iter().sum::<f64>() / n_seeds as f64;
    println!(
        "[acceptance] criterion 5 (white floor control): PASS alpha {alpha_mean:+.4}, \
         amplitude {:.3e} vs {level:.1e}",
        amp_mean
    );
    assert!(alpha_mean.abs() < 0.1, "alpha {alpha_mean}");
    assert!(
        (amp_mean / level - 1.0).abs() <= 0.25,
        "amplitude {amp_mean:.3e} off {level:.1e} by more than 25%"
    );
}

/// Criterion 6: loss-tangent fit recovers tan d_ms = 6e-3 plus the chosen
/// bulk tangent within 5% on noiseless data and within 30% (ensemble mean
/// over 50 seeds) under 10% multiplicative T1 noise.
#[test]
fn criterion_6_loss_budget_recovery() {
    let truth = LossModel {
        tan_delta_ms: 6e-3,
        tan_delta_bulk: 5e-7,
        ..LossModel::default()
    };
    let rows = participation_rows();
    let dataset: Vec<LossDatum> = rows
        .iter()
        .map(|parts| LossDatum {
            parts: parts.clone(),
            t1_s: t1_limit(parts, &truth, 5e9).unwrap(),
            f_q_hz: 5e9,
        })
        .collect();
    let clean = fit_loss_tangents(&dataset, &LossFitFlags::default()).unwrap();
    let ms_err = (clean.model.tan_delta_ms / 6e-3 - 1.0).abs();
    let bulk_err = (clean.model.tan_delta_bulk / 5e-7 - 1.0).abs();
    assert!(ms_err <= 0.05, "noiseless MS tangent off by {ms_err:.2e}");
    assert!(bulk_err <= 0.05, "noiseless bulk tangent off by {bulk_err:.2e}");

    // 10% multiplicative T1 noise, deterministic per-seed perturbations.
    use rand::prelude::*;
    let n_seeds = 50;
    let (mut ms_sum, mut bulk_sum) = (0.0, 0.0);
    for seed in 0..n_seeds {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        let noisy: Vec<LossDatum> = dataset
            .iter()
            .map(|d| {
                let eps: f64 = rng.sample::<f64, _>(rand_distr::StandardNormal);
                LossDatum {
                    parts: d.parts.clone(),
                    t1_s: d.t1_s * (1.0 + 0.10 * eps).max(0.2),
                    f_q_hz: d.f_q_hz,
                }
            })
            .collect();
        let fit = fit_loss_tangents(&noisy, &LossFitFlags::default()).unwrap();
        ms_sum += fit.model.tan_delta_ms;
        bulk_sum += fit.model.tan_delta_bulk;
    }
    let ms_mean = ms_sum / n_seeds as f64;
    let bulk_mean = bulk_sum / n_seeds as f64;
    let ms_noisy_err = (ms_mean / 6e-3 - 1.0).abs();
    let bulk_noisy_err = (bulk_mean / 5e-7 - 1.0).abs();
    println!(
        "[acceptance] criterion 6 (loss-tangent recovery): PASS noiseless \
         ({:.2e}, {:.2e}); noisy ensemble ({:.1}%, {:.1}%)",
        ms_err,
        bulk_err,
        ms_noisy_err * 100.0,
        bulk_noisy_err * 100.0
    );
    assert!(ms_noisy_err <= 0.30, "noisy MS tangent off by {ms_noisy_err:.2}");
    assert!(
        bulk_noisy_err <= 0.30,
        "noisy bulk tangent off by {bulk_noisy_err:.2}"
    );
}

/// Criterion 7: structural reproduction of the T1-vs-participation plot:
/// the constant-tan-delta guide line passes through the high-MS synthetic
/// points, the bulk-only line is flat in p_ms, and the combined rate is the
/// exact sum of both.
#[test]
fn criterion_7_loss_guide_curves() {
    let rows = participation_rows();
    let f_q = 5e9;
    let ms_line = LossModel {
        tan_delta_ms: 6e-3,
        ..LossModel::default()
    };
    let bulk_line = LossModel {
        tan_delta_bulk: 5e-7,
        ..LossModel::default()
    };
    let combined = LossModel {
        tan_delta_ms: 6e-3,
        tan_delta_bulk: 5e-7,
        ..LossModel::default()
    };

    // (a) high-p_ms synthetic points (from the combined model) sit on the
    // constant-tan-delta line within 10%.
    let mut worst_a: f64 = 0.0;
    for row in rows.iter().filter(|r| r.p_ms >= 1e-3) {
        let point = t1_limit(row, &combined, f_q).unwrap();
        let line = t1_limit(row, &ms_line, f_q).unwrap();
        worst_a = worst_a.max((point / line - 1.0).abs());
    }
    assert!(worst_a <= 0.10, "MS line misses high-p_ms points by {worst_a:.3}");

    // (b) the bulk-only line is horizontal in p_ms.
    let bulk_t1s: Vec<f64> = rows
        .iter()
        .map(|r| t1_limit(r, &bulk_line, f_q).unwrap())
        .collect();
    for t in &bulk_t1s {
        assert!(
            (t / bulk_t1s[0] - 1.0).abs() <= 1e-12,
            "bulk line not flat: {t} vs {}",
            bulk_t1s[0]
        );
    }

    // (c) combined rate equals the sum of the parts at every point.
    let mut worst_c: f64 = 0.0;
    for row in &rows {
        let sum = 1.0 / t1_limit(row, &ms_line, f_q).unwrap()
            + 1.0 / t1_limit(row, &bulk_line, f_q).unwrap();
        let combined_rate = 1.0 / t1_limit(row, &combined, f_q).unwrap();
        worst_c = worst_c.max((combined_rate / sum - 1.0).abs());
    }
    assert!(worst_c <= 1e-12, "rate additivity violated by {worst_c:.3e}");

    println!(
        "[acceptance] criterion 7 (guide-curve structure): PASS \
         line-through-points within {:.1}%, additivity within {worst_c:.1e}",
        worst_a * 100.0
    );
}

/// Criterion 8: the heavyweight module invariants not exercised elsewhere:
/// synthesis -> periodogram -> power-law fit closes for alpha in
/// {0, 0.5, 0.8, 1.0}, and the rectangular approximation improves with N.
/// The remaining invariants run in the per-module unit and property suites.
#[test]
fn criterion_8_module_invariants() {
    // Synthesis round trip through the Welch periodogram.
    for alpha in [0.0, 0.5, 0.8, 1.0] {
        let truth_amp = 1.6e-11;
        let psd = PowerLawPsd::power_law(truth_amp, alpha).unwrap();
        let n_seeds = 24;
        let (mut alpha_sum, mut amp_sum) = (0.0, 0.0);
        for seed in 0..n_seeds {
            let traj = synthesize_trajectory(&psd, 256.0, 1.0 / 512.0, 7000 + seed).unwrap();
            let est = periodogram(&traj, 8).unwrap();
            let fit = fit_power_law(&est, (0.1, 50.0)).unwrap();
            alpha_sum += fit.alpha;
            amp_sum += fit.amplitude_at_pivot;
        }
        let alpha_mean = alpha_sum / n_seeds as f64;
        let amp_mean = amp_sum / n_seeds as f64;
        assert!(
            (alpha_mean - alpha).abs() <= 0.1,
            "alpha {alpha}: recovered {alpha_mean}"
        );
        assert!(
            (amp_mean / truth_amp - 1.0).abs() <= 0.2,
            "alpha {alpha}: amplitude {amp_mean:.3e} vs {truth_amp:.3e}"
        );
    }

    // Rectangular-filter estimate of int S g d omega converges with N.
    let psd = PowerLawPsd::power_law(1.0, 0.8).unwrap();
    let d = 1.0;
    let tau = 20e-6;
    let cfg = IntegrationConfig::default();
    let rel_err = |n: u32| {
        let seq = CpmgSequence::new(n, tau).unwrap();
        let exact = coherence_exponent(&psd, d, &seq, &cfg).unwrap();
        let rect = seq.rectangular_approximation().unwrap();
        let s_omega = psd.eval_angular(rect.omega_c_rad_s).unwrap();
        let approx = 0.5 * tau * tau * d * d * s_omega * rect.area();
        (approx / exact - 1.0).abs()
    };
    let err_2 = rel_err(2);
    let err_48 = rel_err(48);
    assert!(
        err_48 < err_2,
        "rectangular approximation should improve with N: {err_48} !< {err_2}"
    );
    println!(
        "[acceptance] criterion 8 (module invariants): PASS periodogram \
         round trips closed; rect error N=48 {err_48:.4} < N=2 {err_2:.4}"
    );
}
