use fluxnoise_core::dephasing::*;
use fluxnoise_core::filter::CpmgSequence;
use fluxnoise_core::noise::PowerLawPsd;
use fluxnoise_core::spectroscopy::*;
use fluxnoise_core::transduction::{Transduction, TransmonModel};

/// tau at which chi reaches the target, by log bisection (chi monotone in tau).
fn tau_for_chi(psd: &PowerLawPsd, d: f64, n: u32, target: f64, cfg: &IntegrationConfig) -> f64 {
    let (mut lo, mut hi) = (1e-7f64, 1e-3f64);
    for _ in 0..40 {
        let mid = (lo * hi).sqrt();
        let chi = coherence_exponent(psd, d, &CpmgSequence::new(n, mid).unwrap(), cfg).unwrap();
        if chi < target { lo = mid; } else { hi = mid; }
    }
    (lo * hi).sqrt()
}

fn run(psd: &PowerLawPsd, noise: f64, seed: u64) -> (f64, f64, usize) {
    let model = TransmonModel::new(15e9, 0.25e9, 0.0, 0.0).unwrap();
    let d = model.flux_sensitivity(0.25).unwrap();
    let cfg = IntegrationConfig::default();
    let mut seqs = Vec::new();
    for n in [1u32, 2, 5, 14, 48] {
        let t_lo = tau_for_chi(psd, d, n, 0.04, &cfg);
        let t_hi = tau_for_chi(psd, d, n, 6.0, &cfg);
        for i in 0..30 {
            let tau = t_lo * (t_hi / t_lo).powf(i as f64 / 29.0);
            seqs.push(CpmgSequence::new(n, tau).unwrap());
        }
    }
    let meta = TraceMeta { qubit_id: "s".into(), flux_phi0: 0.25 };
    let traces = simulate_signal(psd, d, &seqs, 40e-6, 0.1, 0.8, noise, seed, &cfg, &meta).unwrap();
    let fits: Vec<_> = traces.iter().map(|t| fit_trace(t, &FitOptions::default()).unwrap()).collect();
    let (est, _) = extract_psd(&traces, &fits, &Transduction::Model(model.clone()), 0.25,
        &ExtractOptions::default()).unwrap();
    let lo = est.points.first().unwrap().freq_hz * 0.999;
    let hi = est.points.last().unwrap().freq_hz * 1.001;
    let f = fit_power_law(&est, (lo, hi)).unwrap();
    (f.alpha, f.amplitude_at_pivot, est.points.len())
}

fn main() {
    let psd = PowerLawPsd::power_law(4e-12, 0.8).unwrap();
    let (a0, m0, n0) = run(&psd, 0.0, 0);
    eprintln!("designed grid noiseless: alpha {a0:.4} amp {:+.1}% (n={n0})", (m0/4e-12-1.0)*100.0);
    let n_seeds = 8u64;
    let (mut a_s, mut m_s) = (0.0, 0.0);
    for seed in 0..n_seeds {
        let (a, m, _) = run(&psd, 0.005, seed);
        a_s += a; m_s += m;
    }
    eprintln!("designed grid noisy:     alpha {:.4} amp {:+.1}%", a_s/n_seeds as f64, (m_s/n_seeds as f64/4e-12-1.0)*100.0);

    // white floor with designed grid
    let white = PowerLawPsd::white(1e-16).unwrap();
    let (aw, mw, nw) = run(&white, 0.0, 0);
    eprintln!("white designed noiseless: alpha {aw:+.4} amp {:+.1}% (n={nw})", (mw/1e-16-1.0)*100.0);
    let (mut aws, mut mws) = (0.0, 0.0);
    for seed in 0..n_seeds {
        let (a, m, _) = run(&white, 0.005, seed);
        aws += a; mws += m;
    }
    eprintln!("white designed noisy:     alpha {:+.4} amp {:+.1}%", aws/n_seeds as f64, (mws/n_seeds as f64/1e-16-1.0)*100.0);
}
