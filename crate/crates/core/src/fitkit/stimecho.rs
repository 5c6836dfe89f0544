//! Global fit of stimulated-echo decay surfaces.

use std::f64::consts::PI;

use nalgebra::{DMatrix, DVector};

use super::lm::{least_squares, FitProblem, FitResult};
use crate::coherence::{stim_echo_regime_valid, StimEchoParams};
use crate::numerics::mad_noise;
use crate::{Error, Result};

/// One decay curve: echo amplitude versus waiting time at fixed τ.
#[derive(Debug, Clone, PartialEq)]
pub struct StimEchoSurface {
    pub tau: f64,
    /// `(Tw, amplitude)` pairs.
    pub points: Vec<(f64, f64)>,
}

#[derive(Debug, Clone)]
pub struct StimEchoFitOptions {
    /// Fit a shared overall amplitude A0; otherwise A0 = 1.
    pub fit_amplitude: bool,
    /// Per-surface noise σ; estimated from each curve's tail when absent.
    pub noise: Option<Vec<f64>>,
}

impl Default for StimEchoFitOptions {
    fn default() -> Self {
        StimEchoFitOptions { fit_amplitude: true, noise: None }
    }
}

#[derive(Debug, Clone)]
pub struct StimEchoFit {
    pub params: StimEchoParams,
    pub gamma0_sigma: f64,
    pub gamma_sd_sigma: f64,
    pub rate_sigma: f64,
    /// 1/T1 and its uncertainty, Hz.
    pub t1_rate: f64,
    pub t1_rate_sigma: f64,
    pub amplitude: f64,
    /// Per-surface noise used as weights (empty when unweighted).
    pub noise: Vec<f64>,
    /// Fewer than three distinct τ or singular curvature: Γ0 and Γ_SD
    /// cannot be separated.
    pub gamma_unidentifiable: bool,
    /// Every τ is short against the fitted T1.
    pub regime_valid: bool,
    pub result: FitResult,
}

/// Gradient of `A0 exp[−(Tw k1 + 2πτ Γ_eff)]` with respect to
/// `[Γ0, Γ_SD, R, k1, A0]`; returns the model value.
pub fn stim_echo_gradient(p: &[f64; 5], tau: f64, tw: f64, grad: &mut [f64; 5]) -> f64 {
    let [g0, gsd, r, k1, a0] = *p;
    let decay = (-r * tw).exp();
    let shape = r * tau + 1.0 - decay;
    let l = tw * k1 + 2.0 * PI * tau * (g0 + 0.5 * gsd * shape);
    let e = (-l).exp();
    let m = a0 * e;
    grad[0] = -m * 2.0 * PI * tau;
    grad[1] = -m * PI * tau * shape;
    grad[2] = -m * PI * tau * gsd * (tau + tw * decay);
    grad[3] = -m * tw;
    grad[4] = e;
    m
}

fn tail_noise(s: &StimEchoSurface) -> f64 {
    let mut pts = s.points.clone();
    pts.sort_by(|a, b| a.0.total_cmp(&b.0));
    let tail: Vec<f64> = pts[pts.len() / 2..].iter().map(|p| p.1).collect();
    mad_noise(&tail)
}

/// Linear least squares on log-amplitudes for fixed R; returns
/// (weighted SSR, [ln A0, k1, Γ0, Γ_SD]).
fn log_linear_at_rate(rows: &[(f64, f64, f64, f64)], r: f64) -> Option<(f64, [f64; 4])> {
    let n = rows.len();
    let mut a = DMatrix::zeros(n, 4);
    let mut b = DVector::zeros(n);
    for (i, &(tau, tw, amp, w)) in rows.iter().enumerate() {
        let shape = r * tau + 1.0 - (-r * tw).exp();
        a[(i, 0)] = w;
        a[(i, 1)] = -tw * w;
        a[(i, 2)] = -2.0 * PI * tau * w;
        a[(i, 3)] = -PI * tau * shape * w;
        b[i] = amp.ln() * w;
    }
    // Column scaling keeps the SVD well conditioned across units.
    let scale: Vec<f64> = (0..4).map(|j| a.column(j).norm().max(1e-300)).collect();
    for j in 0..4 {
        a.column_mut(j).unscale_mut(scale[j]);
    }
    let svd = a.clone().svd(true, true);
    let x = svd.solve(&b, 1e-12).ok()?;
    let ssr = (&a * &x - &b).norm_squared();
    Some((ssr, [x[0] / scale[0], x[1] / scale[1], x[2] / scale[2], x[3] / scale[3]]))
}

fn initial_guess(surfaces: &[StimEchoSurface], noise: &[f64]) -> [f64; 5] {
    let mut rows = Vec::new();
    let mut tw_max: f64 = 0.0;
    let mut tw_min = f64::INFINITY;
    for (s, sigma) in surfaces.iter().zip(noise) {
        let floor = if *sigma > 0.0 { 3.0 * sigma } else { 1e-3 };
        for &(tw, amp) in &s.points {
            tw_max = tw_max.max(tw);
            if tw > 0.0 {
                tw_min = tw_min.min(tw);
            }
            if amp > floor {
                // σ_ln ≈ σ/A, so weight by A.
                rows.push((s.tau, tw, amp, amp));
            }
        }
    }
    let fallback = [0.0, 1e5, 1.0 / tw_max.max(1e-12), 1.0 / tw_max.max(1e-12), 1.0];
    if rows.len() < 5 || !tw_max.is_finite() || tw_max <= 0.0 {
        return fallback;
    }
    let lo = (0.1 / tw_max).ln();
    let hi = (10.0 / tw_min.min(tw_max)).ln();
    let mut best: Option<(f64, f64, [f64; 4])> = None;
    for k in 0..=120 {
        let r = (lo + (hi - lo) * k as f64 / 120.0).exp();
        if let Some((ssr, x)) = log_linear_at_rate(&rows, r) {
            if best.as_ref().is_none_or(|b| ssr < b.0) {
                best = Some((ssr, r, x));
            }
        }
    }
    match best {
        Some((_, r, x)) => [x[2].max(0.0), x[3].max(1.0), r, x[1].max(0.0), x[0].exp()],
        None => fallback,
    }
}

/// Joint fit of the stimulated-echo decay law to curves taken at several τ,
/// sharing Γ0, Γ_SD, R, T1 (and A0).
pub fn fit_stim_echo_global(surfaces: &[StimEchoSurface], options: &StimEchoFitOptions) -> Result<StimEchoFit> {
    if surfaces.is_empty() || surfaces.iter().any(|s| s.points.is_empty()) {
        return Err(Error::InvalidInput("stimulated-echo fit needs non-empty surfaces".into()));
    }
    if surfaces.iter().any(|s| !(s.tau >= 0.0) || s.points.iter().any(|p| !p.0.is_finite() || !p.1.is_finite())) {
        return Err(Error::InvalidInput("stimulated-echo surfaces must be finite with τ ≥ 0".into()));
    }
    let mut taus: Vec<f64> = surfaces.iter().map(|s| s.tau).collect();
    taus.sort_by(f64::total_cmp);
    taus.dedup_by(|a, b| (*a - *b).abs() <= 1e-12 * a.abs().max(b.abs()));
    let distinct_tau = taus.len();

    let noise: Vec<f64> = match &options.noise {
        Some(n) if n.len() == surfaces.len() => n.clone(),
        Some(_) => return Err(Error::InvalidInput("one noise value per surface is required".into())),
        None => surfaces.iter().map(tail_noise).collect(),
    };
    let weighted = noise.iter().all(|s| *s > 0.0);
    let init = initial_guess(surfaces, &noise);

    let rows: Vec<(f64, f64, f64, usize)> = surfaces
        .iter()
        .enumerate()
        .flat_map(|(c, s)| s.points.iter().map(move |&(tw, a)| (s.tau, tw, a, c)))
        .collect();
    let fit_amp = options.fit_amplitude;
    let np = if fit_amp { 5 } else { 4 };
    let full = |p: &[f64]| -> [f64; 5] { [p[0], p[1], p[2], p[3], if fit_amp { p[4] } else { 1.0 }] };

    let mut initial = init[..np].to_vec();
    if !fit_amp {
        initial.truncate(4);
    }
    let mut prob = FitProblem::new(rows.len(), initial, |p, out| {
        let q = full(p);
        let mut g = [0.0; 5];
        for (i, &(tau, tw, a, _)) in rows.iter().enumerate() {
            out[i] = stim_echo_gradient(&q, tau, tw, &mut g) - a;
        }
    })
    .with_jacobian(|p, jac| {
        let q = full(p);
        let mut g = [0.0; 5];
        for (i, &(tau, tw, _, _)) in rows.iter().enumerate() {
            stim_echo_gradient(&q, tau, tw, &mut g);
            for j in 0..np {
                jac[(i, j)] = g[j];
            }
        }
    })
    .with_bounds(vec![0.0; np], vec![f64::INFINITY; np]);
    if weighted {
        prob = prob.with_weights(rows.iter().map(|r| 1.0 / noise[r.3]).collect());
    }
    let result = least_squares(&prob)?;
    let q = full(&result.params);
    let t1 = if q[3] > 0.0 { 1.0 / q[3] } else { f64::INFINITY };
    let params = StimEchoParams { gamma0: q[0], gamma_sd: q[1], rate: q[2], t1 };
    let regime_valid = surfaces.iter().all(|s| stim_echo_regime_valid(&params, s.tau));
    Ok(StimEchoFit {
        params,
        gamma0_sigma: result.sigma[0],
        gamma_sd_sigma: result.sigma[1],
        rate_sigma: result.sigma[2],
        t1_rate: q[3],
        t1_rate_sigma: result.sigma[3],
        amplitude: q[4],
        noise: if weighted { noise } else { Vec::new() },
        gamma_unidentifiable: distinct_tau < 3 || result.singular_curvature,
        regime_valid,
        result,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::coherence::stim_echo_amplitude;

    fn surfaces(p: &StimEchoParams, taus: &[f64]) -> Vec<StimEchoSurface> {
        taus.iter()
            .map(|&tau| StimEchoSurface {
                tau,
                points: (0..60).map(|k| {
                    let tw = 5e-6 + k as f64 * 50e-6;
                    (tw, stim_echo_amplitude(p, tau, tw))
                }).collect(),
            })
            .collect()
    }

    #[test]
    fn noiseless_recovery_is_exact() {
        let truth = StimEchoParams { gamma0: 3.7e3, gamma_sd: 192e3, rate: 2.3e3, t1: 1.0 / 1.33e3 };
        let s = surfaces(&truth, &[0.2e-6, 0.5e-6, 0.8e-6, 1.1e-6]);
        let fit = fit_stim_echo_global(&s, &StimEchoFitOptions::default()).unwrap();
        let rel = |a: f64, b: f64| (a / b - 1.0).abs();
        assert!(rel(fit.params.gamma0, truth.gamma0) < 1e-6, "{:?}", fit.params);
        assert!(rel(fit.params.gamma_sd, truth.gamma_sd) < 1e-6);
        assert!(rel(fit.params.rate, truth.rate) < 1e-6);
        assert!(rel(fit.params.t1, truth.t1) < 1e-6);
        assert!(!fit.gamma_unidentifiable);
        assert!(fit.regime_valid);
    }

    #[test]
    fn flags_degenerate_tau() {
        let truth = StimEchoParams { gamma0: 3e3, gamma_sd: 181e3, rate: 1.8e3, t1: 1.0 / 203.0 };
        let s = surfaces(&truth, &[0.5e-6, 0.5e-6]);
        let fit = fit_stim_echo_global(&s, &StimEchoFitOptions::default()).unwrap();
        assert!(fit.gamma_unidentifiable);
    }
}
