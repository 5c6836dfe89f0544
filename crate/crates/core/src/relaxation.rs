//! Spin-lattice relaxation: direct one-phonon process plus a generalised
//! two-phonon integral with a phonon cutoff θ_D and an excited level at θ_E.

use std::f64::consts::FRAC_PI_2;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::constants::MU_B_OVER_KB;
use crate::fitkit::{least_squares, FitProblem, FitResult};
use crate::numerics::{bisect, integrate};
use crate::spin::Site;
use crate::{Error, Result};

const QUAD_REL_TOL: f64 = 1e-8;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RelaxModel {
    /// Hz/T⁵.
    pub alpha_d: f64,
    /// Hz·K⁴.
    pub alpha_r: f64,
    pub theta_d: f64,
    pub theta_e: f64,
    pub g_eff: f64,
    /// Tesla.
    pub field: f64,
}

impl RelaxModel {
    pub fn validate(&self) -> Result<()> {
        let v = [self.alpha_d, self.alpha_r, self.theta_d, self.theta_e, self.g_eff, self.field];
        if v.iter().any(|x| !x.is_finite() || *x < 0.0) {
            return Err(Error::InvalidInput("relaxation parameters must be finite and ≥ 0".into()));
        }
        if self.alpha_r > 0.0 && self.theta_e <= 0.0 {
            return Err(Error::InvalidInput("theta_E must be positive when alpha_R > 0".into()));
        }
        Ok(())
    }

    pub fn direct(&self, t: f64) -> Result<f64> {
        rate_direct(self.alpha_d, self.g_eff, self.field, t)
    }

    pub fn two_phonon(&self, t: f64) -> Result<f64> {
        if self.alpha_r == 0.0 {
            check_temperature(t)?;
            return Ok(0.0);
        }
        rate_two_phonon(self.alpha_r, self.theta_d, self.theta_e, t)
    }
}

fn check_temperature(t: f64) -> Result<()> {
    if t > 0.0 && t.is_finite() {
        Ok(())
    } else {
        Err(Error::Domain(format!("temperature must be positive, got {t} K")))
    }
}

/// `α_D g³ B⁵ coth(μ_B g B / 2 k_B T)`, Hz.
pub fn rate_direct(alpha_d: f64, g_eff: f64, field: f64, t: f64) -> Result<f64> {
    check_temperature(t)?;
    let x = MU_B_OVER_KB * g_eff * field / (2.0 * t);
    if x == 0.0 {
        return Ok(0.0);
    }
    Ok(alpha_d * g_eff.powi(3) * field.powi(5) / x.tanh())
}

/// `e^{−x}/(1 − e^{−x})² = 1 / (4 sinh²(x/2))`.
fn bose_kernel(x: f64) -> f64 {
    let s = (0.5 * x).sinh();
    0.25 / (s * s)
}

/// Integrand of the two-phonon rate at angle `q`.
pub fn two_phonon_integrand(q: f64, theta_d: f64, theta_e: f64, t: f64) -> f64 {
    if q <= 0.0 {
        return 0.0;
    }
    let s = q.sin();
    let x = theta_d / t * s;
    let den = theta_e * theta_e - theta_d * theta_d * s * s;
    q.powi(8) * bose_kernel(x) / (den * den)
}

/// `α_R ∫₀^{π/2} q⁸ e^{−x} / [(1 − e^{−x})² (θ_E² − θ_D² sin²q)²] dq`,
/// `x = (θ_D / T) sin q`.
pub fn rate_two_phonon(alpha_r: f64, theta_d: f64, theta_e: f64, t: f64) -> Result<f64> {
    rate_two_phonon_tol(alpha_r, theta_d, theta_e, t, QUAD_REL_TOL)
}

pub fn rate_two_phonon_tol(alpha_r: f64, theta_d: f64, theta_e: f64, t: f64, rel_tol: f64) -> Result<f64> {
    check_temperature(t)?;
    if !(theta_e > 0.0) || !(theta_d > 0.0) {
        return Err(Error::InvalidInput("theta_D and theta_E must be positive".into()));
    }
    if theta_d >= theta_e {
        return Err(Error::Singularity { q: (theta_e / theta_d).asin(), theta_e });
    }
    if alpha_r == 0.0 {
        return Ok(0.0);
    }
    let q = integrate(|q| two_phonon_integrand(q, theta_d, theta_e, t), 0.0, FRAC_PI_2, rel_tol, 0.0)?;
    Ok(alpha_r * q.value)
}

pub fn rate_total(model: &RelaxModel, t: f64) -> Result<f64> {
    model.validate()?;
    Ok(model.direct(t)? + model.two_phonon(t)?)
}

/// Orbach-form comparison curve `α_O / (e^{θ_E/T} − 1)`.
pub fn rate_orbach(alpha_o: f64, theta_e: f64, t: f64) -> Result<f64> {
    check_temperature(t)?;
    Ok(alpha_o / (theta_e / t).exp_m1())
}

/// Temperature in `(lo, hi)` where the direct and two-phonon rates are equal.
pub fn crossover_temperature(model: &RelaxModel, lo: f64, hi: f64) -> Result<Option<f64>> {
    model.validate()?;
    let diff = |t: f64| {
        let d = model.direct(t).unwrap_or(f64::NAN);
        let r = model.two_phonon(t).unwrap_or(f64::NAN);
        (r / d).ln()
    };
    check_temperature(lo)?;
    check_temperature(hi)?;
    // Surface a pole or quadrature failure before bisecting.
    model.two_phonon(lo)?;
    model.two_phonon(hi)?;
    Ok(bisect(diff, lo, hi, 1e-9 * hi, 0.0))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct T1Point {
    pub temperature: f64,
    pub rate: f64,
    /// One-sigma uncertainty of the rate; zero if unknown.
    pub sigma: f64,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct T1Series {
    pub points: Vec<T1Point>,
    pub site: Option<Site>,
    pub isotope: Option<String>,
    /// Tesla.
    pub field: f64,
    pub orientation: Option<String>,
}

impl T1Series {
    pub fn validate(&self) -> Result<()> {
        if self.points.is_empty() {
            return Err(Error::InvalidInput("T1 series is empty".into()));
        }
        for (i, p) in self.points.iter().enumerate() {
            if !(p.temperature > 0.0) || !(p.rate > 0.0) || !(p.sigma >= 0.0) || !p.rate.is_finite() {
                return Err(Error::InvalidInput(format!(
                    "point {i}: temperature and rate must be positive, sigma ≥ 0"
                )));
            }
        }
        Ok(())
    }
}

/// Per-dataset fixed inputs.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct T1FitInputs {
    pub g_eff: f64,
    pub theta_e: f64,
}

#[derive(Debug, Clone)]
pub struct T1Fit {
    pub model: RelaxModel,
    pub alpha_d_sigma: f64,
    pub alpha_r_sigma: f64,
    /// `None` when θ_D was held fixed.
    pub theta_d_sigma: Option<f64>,
    /// α_R not constrained by the data (relative error > 50% or singular).
    pub alpha_r_unidentified: bool,
    pub chi2_dof: f64,
    pub result: FitResult,
}

#[derive(Debug, Clone)]
pub struct JointT1Fit {
    pub fits: Vec<T1Fit>,
    pub theta_d: f64,
    pub theta_d_sigma: f64,
    pub result: FitResult,
}

/// Log-space fit of one T1 series; `theta_d` fixes θ_D (e.g. a value shared
/// with other datasets), otherwise it is fitted.
pub fn fit_t1_series(series: &T1Series, inputs: T1FitInputs, theta_d: Option<f64>) -> Result<T1Fit> {
    match theta_d {
        Some(v) => {
            let joint = fit_joint(std::slice::from_ref(series), &[inputs], ThetaD::Fixed(v))?;
            Ok(joint.fits.into_iter().next().expect("one dataset"))
        }
        None => {
            let joint = fit_joint(std::slice::from_ref(series), &[inputs], ThetaD::Free)?;
            Ok(joint.fits.into_iter().next().expect("one dataset"))
        }
    }
}

/// Joint fit of several datasets constrained to a common θ_D.
pub fn fit_t1_joint(series: &[T1Series], inputs: &[T1FitInputs]) -> Result<JointT1Fit> {
    fit_joint(series, inputs, ThetaD::Free)
}

#[derive(Clone, Copy)]
enum ThetaD {
    Free,
    Fixed(f64),
}

/// Log-log slope estimate used to seed α_D and α_R.
fn seed_alphas(series: &T1Series, inp: T1FitInputs, theta_d: f64) -> (f64, f64) {
    let mut pts = series.points.clone();
    pts.sort_by(|a, b| a.temperature.total_cmp(&b.temperature));
    let lo = pts[0];
    let hi = pts[pts.len() - 1];
    let unit_d = rate_direct(1.0, inp.g_eff, series.field, lo.temperature).unwrap_or(1.0);
    let alpha_d = (lo.rate / unit_d).max(1e-30);
    let unit_r = rate_two_phonon(1.0, theta_d, inp.theta_e, hi.temperature).unwrap_or(1.0);
    let direct_hi = alpha_d * rate_direct(1.0, inp.g_eff, series.field, hi.temperature).unwrap_or(0.0);
    let alpha_r = ((hi.rate - direct_hi).max(0.1 * hi.rate) / unit_r).max(1e-30);
    (alpha_d, alpha_r)
}

fn fit_joint(series: &[T1Series], inputs: &[T1FitInputs], theta_d: ThetaD) -> Result<JointT1Fit> {
    if series.is_empty() || series.len() != inputs.len() {
        return Err(Error::InvalidInput("one set of inputs per T1 series is required".into()));
    }
    for s in series {
        s.validate()?;
        if s.points.len() < 4 {
            return Err(Error::InvalidInput(format!("T1 fit needs ≥ 4 points, got {}", s.points.len())));
        }
    }
    let theta_e_min = inputs.iter().map(|i| i.theta_e).fold(f64::INFINITY, f64::min);
    if !(theta_e_min > 0.0) {
        return Err(Error::InvalidInput("theta_E must be positive".into()));
    }
    let free = matches!(theta_d, ThetaD::Free);
    let theta_d0 = match theta_d {
        ThetaD::Fixed(v) => {
            if v >= theta_e_min {
                return Err(Error::Singularity { q: (theta_e_min / v).asin(), theta_e: theta_e_min });
            }
            v
        }
        ThetaD::Free => 0.6 * theta_e_min,
    };
    let n_sets = series.len();
    let np = 2 * n_sets + usize::from(free);
    // Parameters: ln α_D, ln α_R per set, then ln θ_D if free.
    let mut initial = Vec::with_capacity(np);
    for (s, inp) in series.iter().zip(inputs) {
        let (ad, ar) = seed_alphas(s, *inp, theta_d0);
        initial.push(ad.ln());
        initial.push(ar.ln());
    }
    let mut lower = vec![-300.0; np];
    let mut upper = vec![300.0; np];
    if free {
        initial.push(theta_d0.ln());
        lower[np - 1] = 1e-3f64.ln();
        upper[np - 1] = (theta_e_min * (1.0 - 1e-6)).ln();
    }
    let rows: Vec<(usize, T1Point)> = series
        .iter()
        .enumerate()
        .flat_map(|(k, s)| s.points.iter().map(move |p| (k, *p)))
        .collect();
    let theta_of = |p: &[f64]| if free { p[np - 1].exp() } else { theta_d0 };
    let unit_direct: Vec<f64> = rows
        .iter()
        .map(|(k, pt)| rate_direct(1.0, inputs[*k].g_eff, series[*k].field, pt.temperature).unwrap_or(0.0))
        .collect();

    let model_rates = |p: &[f64], k: usize, t: f64, ud: f64| -> (f64, f64) {
        let direct = p[2 * k].exp() * ud;
        let raman = rate_two_phonon(p[2 * k + 1].exp(), theta_of(p), inputs[k].theta_e, t).unwrap_or(f64::NAN);
        (direct, raman)
    };

    let weighted = rows.iter().all(|(_, p)| p.sigma > 0.0);
    let mut prob = FitProblem::new(rows.len(), initial, |p, out| {
        for (i, (k, pt)) in rows.iter().enumerate() {
            let (d, r) = model_rates(p, *k, pt.temperature, unit_direct[i]);
            out[i] = (d + r).ln() - pt.rate.ln();
        }
    })
    .with_jacobian(|p, jac| {
        jac.fill(0.0);
        let th = theta_of(p);
        for (i, (k, pt)) in rows.iter().enumerate() {
            let (d, r) = model_rates(p, *k, pt.temperature, unit_direct[i]);
            let tot = d + r;
            jac[(i, 2 * k)] = d / tot;
            jac[(i, 2 * k + 1)] = r / tot;
            if free {
                // d ln(total)/d ln θ_D by central difference on the integral.
                let h: f64 = 1e-5;
                let te = inputs[*k].theta_e;
                let ar = p[2 * k + 1].exp();
                let up = (th * h.exp()).min(te * (1.0 - 1e-9));
                let rp = rate_two_phonon(ar, up, te, pt.temperature).unwrap_or(r);
                let rm = rate_two_phonon(ar, th * (-h).exp(), te, pt.temperature).unwrap_or(r);
                jac[(i, np - 1)] = (rp - rm) / ((up / th).ln() + h) / tot;
            }
        }
    })
    .with_bounds(lower, upper);
    if weighted {
        // σ of ln(rate) is σ_rate / rate.
        prob = prob.with_weights(rows.iter().map(|(_, p)| p.rate / p.sigma).collect());
    }
    let result = least_squares(&prob)?;
    if !result.converged {
        return Err(Error::FitFailure {
            iterations: result.iterations,
            reason: format!("best parameters so far {:?}", result.params.iter().map(|v| v.exp()).collect::<Vec<_>>()),
        });
    }
    let th = theta_of(&result.params);
    let th_sigma = if free { th * result.sigma[np - 1] } else { 0.0 };
    let dof_chi = result.chi2_dof;
    let fits = (0..n_sets)
        .map(|k| {
            let ad = result.params[2 * k].exp();
            let ar = result.params[2 * k + 1].exp();
            let ad_s = ad * result.sigma[2 * k];
            let rel_r = result.sigma[2 * k + 1];
            let sub_idx: Vec<usize> = if free { vec![2 * k, 2 * k + 1, np - 1] } else { vec![2 * k, 2 * k + 1] };
            let cov = DMatrix::from_fn(sub_idx.len(), sub_idx.len(), |a, b| result.covariance[(sub_idx[a], sub_idx[b])]);
            let mut sub = result.clone();
            sub.params = sub_idx.iter().map(|&j| result.params[j].exp()).collect();
            sub.sigma = sub_idx.iter().map(|&j| result.params[j].exp() * result.sigma[j]).collect();
            sub.covariance = cov;
            T1Fit {
                model: RelaxModel {
                    alpha_d: ad,
                    alpha_r: ar,
                    theta_d: th,
                    theta_e: inputs[k].theta_e,
                    g_eff: inputs[k].g_eff,
                    field: series[k].field,
                },
                alpha_d_sigma: ad_s,
                alpha_r_sigma: ar * rel_r,
                theta_d_sigma: free.then_some(th_sigma),
                alpha_r_unidentified: !(rel_r < 0.5) || !rel_r.is_finite(),
                chi2_dof: dof_chi,
                result: sub,
            }
        })
        .collect();
    Ok(JointT1Fit { fits, theta_d: th, theta_d_sigma: th_sigma, result })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn site_i() -> RelaxModel {
        RelaxModel { alpha_d: 13.2, alpha_r: 0.88e18, theta_d: 100.0, theta_e: 160.0, g_eff: 0.686, field: 1.0208 }
    }

    #[test]
    fn direct_rate_limits() {
        assert_eq!(rate_direct(13.2, 0.7, 0.0, 3.0).unwrap(), 0.0);
        assert!(rate_direct(13.2, 0.7, 1.0, 0.0).is_err());
        assert!(rate_direct(13.2, 0.7, 1.0, -1.0).is_err());
        let (g, b, t) = (0.7f64, 0.1f64, 20.0f64);
        let approx = 2.0 * 13.2 * t * g * g * b.powi(4) / MU_B_OVER_KB;
        assert!((rate_direct(13.2, g, b, t).unwrap() / approx - 1.0).abs() < 0.01);
    }

    #[test]
    fn two_phonon_monotone_and_vanishing() {
        let m = site_i();
        let mut prev = 0.0;
        for k in 1..=20 {
            let r = m.two_phonon(0.5 * k as f64).unwrap();
            assert!(r > prev);
            prev = r;
        }
        assert!(m.two_phonon(0.05).unwrap() < 1e-12 * m.two_phonon(10.0).unwrap());
    }

    #[test]
    fn pole_is_reported() {
        match rate_two_phonon(1e18, 200.0, 160.0, 5.0) {
            Err(Error::Singularity { q, theta_e }) => {
                assert!((200.0 * q.sin() - 160.0).abs() < 1e-9);
                assert_eq!(theta_e, 160.0);
            }
            other => panic!("expected singularity, got {other:?}"),
        }
    }

    #[test]
    fn theta_e_power_law() {
        let a = rate_two_phonon(1.0, 10.0, 1e4, 3.0).unwrap();
        let b = rate_two_phonon(1.0, 10.0, 2e4, 3.0).unwrap();
        assert!((a / b / 16.0 - 1.0).abs() < 1e-5);
    }

    #[test]
    fn total_is_sum_and_reduces() {
        let m = site_i();
        let t = 4.5;
        let only_d = RelaxModel { alpha_r: 0.0, ..m };
        let only_r = RelaxModel { alpha_d: 0.0, ..m };
        assert_eq!(rate_total(&only_d, t).unwrap(), m.direct(t).unwrap());
        assert_eq!(rate_total(&only_r, t).unwrap(), m.two_phonon(t).unwrap());
        let x = crossover_temperature(&m, 2.0, 10.0).unwrap().unwrap();
        assert!((m.direct(x).unwrap() / m.two_phonon(x).unwrap() - 1.0).abs() < 1e-6);
    }

    #[test]
    fn orbach_is_exponential_at_low_t() {
        let r1 = rate_orbach(1e9, 160.0, 4.0).unwrap();
        let r2 = rate_orbach(1e9, 160.0, 5.0).unwrap();
        assert!((r2 / r1 - (160.0 / 4.0 - 160.0 / 5.0f64).exp()).abs() < 1e-6 * r2 / r1);
    }

    #[test]
    fn rejects_short_series() {
        let s = T1Series {
            points: (1..=3).map(|k| T1Point { temperature: k as f64, rate: 1.0, sigma: 0.1 }).collect(),
            field: 1.0,
            ..Default::default()
        };
        let inp = T1FitInputs { g_eff: 0.7, theta_e: 160.0 };
        assert!(matches!(fit_t1_series(&s, inp, Some(100.0)), Err(Error::InvalidInput(_))));
        let empty = T1Series { field: 1.0, ..Default::default() };
        assert!(fit_t1_series(&empty, inp, None).is_err());
    }
}
