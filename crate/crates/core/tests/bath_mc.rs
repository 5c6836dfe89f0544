use spinlab::bath::{
    fit_mc_curve, make_sequence, sample_bath, simulate_decay, simulate_sequences, McModel, SequenceParams, Sweep,
};
use spinlab::constants::{gamma_from_mu_b, per_cm3};
use spinlab::numerics::quantile;
use spinlab::{BathConfig, BathSpecies, SequenceKind};

fn species(g: f64, rate: f64) -> BathSpecies {
    BathSpecies {
        label: format!("g{g}"),
        density: per_cm3(4.7e17),
        gamma: gamma_from_mu_b(g),
        flip_rate_hz: rate,
        resonant: false,
        mean_flip: 1.0,
    }
}

#[test]
fn static_shifts_are_lorentzian_with_dipolar_width() {
    let mut cfg = BathConfig::new(vec![species(6.0, 0.0)], gamma_from_mu_b(2.0));
    cfg.seed = 5;
    let mut shifts: Vec<f64> = (0..20_000).map(|i| sample_bath(&cfg, i, 0.0).unwrap().static_shift()).collect();
    shifts.sort_by(f64::total_cmp);
    let iqr = quantile(&shifts, 0.75) - quantile(&shifts, 0.25);
    let fwhm = cfg.species_linewidths()[0];
    assert!((iqr / fwhm - 1.0).abs() < 0.10, "IQR {iqr} vs FWHM {fwhm}");
}

#[test]
fn poisson_spin_count() {
    let cfg = BathConfig::new(vec![species(2.0, 0.0), species(6.0, 0.0)], gamma_from_mu_b(2.0));
    let counts: Vec<f64> = (0..400).map(|i| sample_bath(&cfg, i, 0.0).unwrap().len() as f64).collect();
    let mean = counts.iter().sum::<f64>() / counts.len() as f64;
    let var = counts.iter().map(|c| (c - mean).powi(2)).sum::<f64>() / (counts.len() - 1) as f64;
    assert!((mean - 2000.0).abs() < 3.0 * (2000.0f64 / 400.0).sqrt() + 1.0, "{mean}");
    assert!((var / mean - 1.0).abs() < 0.25, "{var} vs {mean}");
}

#[test]
fn fast_toggling_narrows_to_simple_exponential() {
    // Exclusion radius keeps every coupling far below the toggle rate.
    let mut cfg = BathConfig::new(vec![species(6.0, 1e6)], gamma_from_mu_b(2.0));
    cfg.min_distance_m = 25e-9;
    cfg.box_spins = 300;
    cfg.realizations = 400;
    cfg.seed = 6;
    let x: Vec<f64> = (0..16).map(|k| k as f64 * 20e-6).collect();
    let (curve, _) = simulate_decay(&cfg, SequenceKind::Hahn, &SequenceParams::default(), Sweep::TotalTime, &x, None).unwrap();
    let fit = fit_mc_curve(&curve, McModel::Stretched).unwrap();
    assert!(!fit.unidentifiable, "{:?}", curve.amplitude);
    assert!((fit.decay.n - 1.0).abs() < 0.15, "n = {} {:?}", fit.decay.n, curve.amplitude);
}

#[test]
fn stderr_shrinks_as_inverse_root_n() {
    let seq = [Some(make_sequence(SequenceKind::Hahn, &SequenceParams { tau: 15e-6, ..Default::default() }).unwrap())];
    let mut cfg = BathConfig::new(vec![species(2.0, 45.0), species(6.0, 925.0)], gamma_from_mu_b(2.0));
    cfg.seed = 8;
    let mut errs = Vec::new();
    for n in [500, 2000, 8000] {
        cfg.realizations = n;
        errs.push(simulate_sequences(&cfg, &seq, None).unwrap().stderr[0]);
    }
    for w in errs.windows(2) {
        assert!((w[0] / w[1] - 2.0).abs() < 0.25, "{errs:?}");
    }
}

#[test]
fn pulse_error_costs_less_under_xy16_than_cpmg() {
    let mut cfg = BathConfig::new(vec![species(2.0, 0.0)], gamma_from_mu_b(2.0));
    cfg.realizations = 200;
    cfg.seed = 9;
    let params = SequenceParams { tau: 2e-6, n_pulses: Some(64), pulse_error: 0.05, ..Default::default() };
    let cpmg = make_sequence(SequenceKind::Cpmg, &params).unwrap();
    let xy = make_sequence(SequenceKind::Xy16, &SequenceParams { cycles: 4, ..params }).unwrap();
    let out = simulate_sequences(&cfg, &[Some(cpmg), Some(xy)], None).unwrap();
    // CPMG protects the +x state; XY16 must do comparably well.
    assert!(out.mean[1] > 0.9, "{:?}", out.mean);
    assert!(out.mean[0] > 0.9, "{:?}", out.mean);
}
