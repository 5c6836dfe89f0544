use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use spinlab::relaxation::{
    fit_t1_joint, fit_t1_series, rate_two_phonon, rate_two_phonon_tol, two_phonon_integrand, RelaxModel, T1FitInputs,
    T1Point, T1Series,
};

fn site_i() -> RelaxModel {
    RelaxModel { alpha_d: 13.2, alpha_r: 0.88e18, theta_d: 100.0, theta_e: 160.0, g_eff: 0.686, field: 1.0208 }
}

fn site_ii() -> RelaxModel {
    RelaxModel { alpha_d: 1.7, alpha_r: 2.4e18, theta_d: 100.0, theta_e: 337.0, g_eff: 2.3, field: 1.1429 }
}

fn synth(m: &RelaxModel, temps: &[f64], noise: f64, seed: u64) -> T1Series {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = Normal::new(0.0, noise).unwrap();
    T1Series {
        points: temps
            .iter()
            .map(|&t| {
                let r = spinlab::relaxation::rate_total(m, t).unwrap();
                T1Point { temperature: t, rate: r * (1.0 + n.sample(&mut rng)), sigma: noise * r }
            })
            .collect(),
        field: m.field,
        ..Default::default()
    }
}

fn temps() -> Vec<f64> {
    (0..13).map(|k| 2.0 + 0.5 * k as f64).collect()
}

#[test]
fn two_phonon_matches_riemann_oracle() {
    let (th_d, th_e, t) = (100.0, 160.0, 5.0);
    let n = 1_000_000;
    let h = std::f64::consts::FRAC_PI_2 / n as f64;
    // Midpoint rule written out independently of the library integrand.
    let mut sum = 0.0;
    for k in 0..n {
        let q = (k as f64 + 0.5) * h;
        let x = th_d / t * q.sin();
        let den = th_e * th_e - th_d * th_d * q.sin().powi(2);
        sum += q.powi(8) * (-x).exp() / (1.0 - (-x).exp()).powi(2) / (den * den);
    }
    let oracle = 0.88e18 * sum * h;
    let quad = rate_two_phonon(0.88e18, th_d, th_e, t).unwrap();
    assert!((quad / oracle - 1.0).abs() < 1e-6, "{quad} vs {oracle}");
    assert!(two_phonon_integrand(0.0, th_d, th_e, t) == 0.0);
}

#[test]
fn quadrature_tolerance_invariance() {
    for t in [1.0, 2.5, 4.5, 8.0, 20.0] {
        let a = rate_two_phonon_tol(1.0, 100.0, 160.0, t, 1e-8).unwrap();
        let b = rate_two_phonon_tol(1.0, 100.0, 160.0, t, 5e-9).unwrap();
        assert!((a / b - 1.0).abs() < 1e-6);
    }
}

#[test]
fn raman_t9_limit() {
    // θ_E > θ_D ≫ T approaches the Raman power law.
    let (th_d, th_e) = (2000.0, 1e5);
    let r2 = rate_two_phonon(1.0, th_d, th_e, 2.0).unwrap();
    let r4 = rate_two_phonon(1.0, th_d, th_e, 4.0).unwrap();
    let slope = (r4 / r2).ln() / 2f64.ln();
    assert!((slope - 9.0).abs() < 0.3, "slope {slope}");
}

#[test]
fn direct_rate_linear_at_high_temperature() {
    let (g, b) = (0.7, 0.01);
    let f = |t: f64| spinlab::relaxation::rate_direct(1.0, g, b, t).unwrap();
    let t0 = 100.0;
    let curvature = (f(t0 + 10.0) - 2.0 * f(t0) + f(t0 - 10.0)) / f(t0);
    assert!(curvature.abs() < 1e-3);
}

#[test]
fn single_series_round_trip() {
    let m = site_i();
    let inp = T1FitInputs { g_eff: m.g_eff, theta_e: m.theta_e };
    let mut ok_d = 0;
    let mut ok_r = 0;
    let mut chi_ok = 0;
    let trials = 40;
    for seed in 0..trials {
        let s = synth(&m, &temps(), 0.05, seed);
        let fit = fit_t1_series(&s, inp, Some(100.0)).unwrap();
        if (fit.model.alpha_d - m.alpha_d).abs() < 2.0 * fit.alpha_d_sigma {
            ok_d += 1;
        }
        if (fit.model.alpha_r - m.alpha_r).abs() < 2.0 * fit.alpha_r_sigma {
            ok_r += 1;
        }
        if (0.5..=2.0).contains(&fit.chi2_dof) {
            chi_ok += 1;
        }
        assert!(!fit.alpha_r_unidentified);
    }
    assert!(ok_d >= 34 && ok_r >= 34, "{ok_d} {ok_r}");
    assert!(chi_ok >= 30, "{chi_ok}");
}

#[test]
fn free_theta_d_round_trip() {
    let m = site_i();
    let s = synth(&m, &temps(), 0.05, 99);
    let fit = fit_t1_series(&s, T1FitInputs { g_eff: m.g_eff, theta_e: m.theta_e }, None).unwrap();
    let sd = fit.theta_d_sigma.unwrap();
    assert!((fit.model.theta_d - 100.0).abs() < 3.0 * sd + 1.0, "{} ± {sd}", fit.model.theta_d);
}

#[test]
fn low_temperature_data_flags_raman() {
    let m = site_i();
    let s = synth(&m, &[1.5, 1.8, 2.1, 2.4, 2.7, 3.0], 0.05, 4);
    let fit = fit_t1_series(&s, T1FitInputs { g_eff: m.g_eff, theta_e: m.theta_e }, Some(100.0)).unwrap();
    assert!(fit.alpha_r_unidentified, "σ/α_R = {}", fit.alpha_r_sigma / fit.model.alpha_r);
}

#[test]
fn joint_fit_shares_theta_d() {
    let a = site_i();
    let b = site_ii();
    let sa = synth(&a, &temps(), 0.05, 7);
    let sb = synth(&b, &temps(), 0.05, 8);
    let joint = fit_t1_joint(
        &[sa, sb],
        &[T1FitInputs { g_eff: a.g_eff, theta_e: a.theta_e }, T1FitInputs { g_eff: b.g_eff, theta_e: b.theta_e }],
    )
    .unwrap();
    assert!((joint.theta_d / 100.0 - 1.0).abs() < 0.1, "θ_D = {}", joint.theta_d);
    assert_eq!(joint.fits.len(), 2);
    assert_eq!(joint.fits[0].model.theta_d, joint.fits[1].model.theta_d);
}
