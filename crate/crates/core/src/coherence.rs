//! Closed-form coherence models.
//!
//! Rates are in Hz, times in seconds, gyromagnetic ratios in Hz/T and
//! densities in m⁻³. Unbounded coherence times are reported as
//! `f64::INFINITY` so that inverse times add without special cases.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::constants::{MU_0, PLANCK};
use crate::numerics::integrate;
use crate::{Error, Result};

/// Flip-flop rate of ⁸⁹Y nuclei in the bulk, Hz (documented only).
pub const Y89_BULK_FLIP_RATE: f64 = 8.0;
/// ⁸⁹Y flip-flop rate at the nearest-neighbour distance of 3.39 Å, Hz.
pub const Y89_NEAR_FLIP_RATE: f64 = 1.2;

/// `A0 · exp[−(2τ / T2)ⁿ]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StretchedExp {
    pub t2: f64,
    pub n: f64,
    pub a0: f64,
}

impl StretchedExp {
    pub fn new(t2: f64, n: f64, a0: f64) -> Result<Self> {
        let p = StretchedExp { t2, n, a0 };
        p.validate()?;
        Ok(p)
    }

    /// Gaussian decay with the spectral-diffusion time as T2, the default
    /// shape for plotting a two-pulse prediction.
    pub fn from_sd(t_sd: f64) -> Self {
        StretchedExp { t2: t_sd, n: 2.0, a0: 1.0 }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.t2 > 0.0) {
            return Err(Error::InvalidInput(format!("T2 must be positive, got {}", self.t2)));
        }
        if !(self.n > 0.5 && self.n <= 4.0) {
            return Err(Error::InvalidInput(format!("stretch exponent {} outside (0.5, 4]", self.n)));
        }
        if !self.a0.is_finite() {
            return Err(Error::InvalidInput("amplitude must be finite".into()));
        }
        Ok(())
    }

    pub fn eval(&self, two_tau: f64) -> f64 {
        stretched_exp_eval(self, two_tau)
    }
}

pub fn stretched_exp_eval(p: &StretchedExp, two_tau: f64) -> f64 {
    p.a0 * (-(two_tau.max(0.0) / p.t2).powf(p.n)).exp()
}

/// Lorentz-diffusion bath made of the two crystallographic sites.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SdParams {
    /// Density of each bath species, m⁻³.
    pub density: f64,
    pub gamma_central: f64,
    pub gamma_i: f64,
    pub gamma_ii: f64,
    /// Flip rates, Hz.
    pub rate_i: f64,
    pub rate_ii: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SdPrediction {
    pub t_sd: f64,
    /// Time each bath would give on its own.
    pub t_sd_site_i: f64,
    pub t_sd_site_ii: f64,
}

fn inverse_or_inf(rate: f64) -> f64 {
    if rate > 0.0 {
        1.0 / rate
    } else {
        f64::INFINITY
    }
}

/// Spectral-diffusion time of a Lorentz-diffusion bath,
/// `1/T_SD = (π/6)·sqrt(μ0 h n/√3)·Σ_k sqrt(γ_c γ_k R_k)`.
pub fn t_sd(p: &SdParams) -> Result<SdPrediction> {
    let all = [p.density, p.gamma_central, p.gamma_i, p.gamma_ii, p.rate_i, p.rate_ii];
    if all.iter().any(|v| !v.is_finite() || *v < 0.0) {
        return Err(Error::InvalidInput("spectral-diffusion parameters must be finite and ≥ 0".into()));
    }
    let prefactor = PI / 6.0 * (MU_0 * PLANCK * p.density / 3f64.sqrt()).sqrt();
    let term_i = prefactor * (p.gamma_central * p.gamma_i * p.rate_i).sqrt();
    let term_ii = prefactor * (p.gamma_central * p.gamma_ii * p.rate_ii).sqrt();
    Ok(SdPrediction {
        t_sd: inverse_or_inf(term_i + term_ii),
        t_sd_site_i: inverse_or_inf(term_i),
        t_sd_site_ii: inverse_or_inf(term_ii),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum Lineshape {
    Lorentzian,
    #[default]
    Gaussian,
}

impl std::str::FromStr for Lineshape {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "lorentzian" => Ok(Lineshape::Lorentzian),
            "gaussian" => Ok(Lineshape::Gaussian),
            other => Err(Error::InvalidInput(format!("unknown lineshape `{other}`"))),
        }
    }
}

/// Flip probability of a spin detuned by `delta` (Hz) under a pulse of Rabi
/// frequency `rabi` (Hz) and nominal angle `theta`.
pub fn flip_probability(rabi: f64, delta: f64, theta: f64) -> f64 {
    if rabi == 0.0 || theta == 0.0 {
        return 0.0;
    }
    let t_p = theta / (2.0 * PI * rabi);
    let eff = (rabi * rabi + delta * delta).sqrt();
    let s = (PI * eff * t_p).sin();
    rabi * rabi / (eff * eff) * s * s
}

/// ⟨sin²(θ/2)⟩ averaged over an inhomogeneous line of the given FWHM (Hz).
pub fn mean_flip_probability(rabi_freq: f64, line_fwhm: f64, lineshape: Lineshape, nominal_theta: f64) -> Result<f64> {
    if !(rabi_freq > 0.0) || !(line_fwhm > 0.0) {
        return Err(Error::InvalidInput("Rabi frequency and linewidth must be positive".into()));
    }
    if nominal_theta == 0.0 {
        return Ok(0.0);
    }
    let value = match lineshape {
        Lineshape::Gaussian => {
            let sigma = line_fwhm / (2.0 * (2.0 * 2f64.ln()).sqrt());
            let norm = 2.0 / (sigma * (2.0 * PI).sqrt());
            let f = |d: f64| norm * (-0.5 * (d / sigma).powi(2)).exp() * flip_probability(rabi_freq, d, nominal_theta);
            integrate(f, 0.0, 10.0 * sigma, 1e-10, 1e-14)?.value
        }
        Lineshape::Lorentzian => {
            // δ = (Γ/2) tan u maps the Lorentzian onto a uniform density on u.
            let half = 0.5 * line_fwhm;
            let f = |u: f64| 2.0 / PI * flip_probability(rabi_freq, half * u.tan(), nominal_theta);
            integrate(f, 0.0, 0.5 * PI, 1e-10, 1e-14)?.value
        }
    };
    Ok(value.clamp(0.0, 1.0))
}

/// Instantaneous-diffusion inputs.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IdParams {
    /// Density of spins resonant with the pulses, m⁻³.
    pub density_resonant: f64,
    pub gamma: f64,
    /// ⟨sin²(θ/2)⟩.
    pub mean_flip: f64,
}

/// `d(1/T2,ID)/d⟨sin²(θ/2)⟩ = 2π² μ0 h n γ² / (9√3)`, Hz.
pub fn id_slope(density_resonant: f64, gamma: f64) -> f64 {
    2.0 * PI * PI * MU_0 * PLANCK * density_resonant * gamma * gamma / (9.0 * 3f64.sqrt())
}

pub fn t2_id(p: &IdParams) -> Result<f64> {
    if !(0.0..=1.0).contains(&p.mean_flip) {
        return Err(Error::InvalidInput(format!("mean flip probability {} outside [0, 1]", p.mean_flip)));
    }
    if !(p.density_resonant >= 0.0) || !p.gamma.is_finite() {
        return Err(Error::InvalidInput("invalid instantaneous-diffusion parameters".into()));
    }
    Ok(inverse_or_inf(id_slope(p.density_resonant, p.gamma) * p.mean_flip))
}

/// Inverts a measured instantaneous-diffusion slope (Hz) for the resonant
/// spin density.
pub fn resonant_density_from_id_slope(slope: f64, gamma: f64) -> Result<f64> {
    if !(slope >= 0.0) || !(gamma != 0.0) {
        return Err(Error::InvalidInput("slope must be ≥ 0 and γ non-zero".into()));
    }
    Ok(slope / id_slope(1.0, gamma))
}

/// Total dopant fraction (relative to host sites) implied by an
/// instantaneous-diffusion slope. `resonant_fraction` is the fraction of all
/// dopants that are resonant with the pulses (site share × isotope share).
pub fn concentration_from_id_slope(slope: f64, gamma: f64, resonant_fraction: f64, host_density: f64) -> Result<f64> {
    if !(resonant_fraction > 0.0) || !(host_density > 0.0) {
        return Err(Error::InvalidInput("fractions and densities must be positive".into()));
    }
    Ok(resonant_density_from_id_slope(slope, gamma)? / (resonant_fraction * host_density))
}

/// Stimulated-echo decay parameters. Rates in Hz, T1 in seconds
/// (`f64::INFINITY` disables lattice relaxation).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StimEchoParams {
    pub gamma0: f64,
    pub gamma_sd: f64,
    pub rate: f64,
    pub t1: f64,
}

impl StimEchoParams {
    pub fn validate(&self) -> Result<()> {
        let ok = [self.gamma0, self.gamma_sd, self.rate].iter().all(|v| v.is_finite() && *v >= 0.0) && self.t1 > 0.0;
        if ok {
            Ok(())
        } else {
            Err(Error::InvalidInput("stimulated-echo parameters must be ≥ 0 with T1 > 0".into()))
        }
    }

    /// `Γ_eff = Γ0 + ½ Γ_SD (Rτ + 1 − e^{−R Tw})`.
    pub fn gamma_eff(&self, tau: f64, tw: f64) -> f64 {
        self.gamma0 + 0.5 * self.gamma_sd * (self.rate * tau - (-self.rate * tw).exp_m1())
    }
}

/// `A/A0 = exp[−(Tw/T1 + 2π τ Γ_eff)]`.
pub fn stim_echo_amplitude(p: &StimEchoParams, tau: f64, tw: f64) -> f64 {
    (-(tw / p.t1 + 2.0 * PI * tau * p.gamma_eff(tau, tw))).exp()
}

/// The decay law assumes τ short against T1.
pub fn stim_echo_regime_valid(p: &StimEchoParams, tau: f64) -> bool {
    tau < 0.1 * p.t1
}

/// Lorentzian FWHM (Hz) → T2* (s).
pub fn linewidth_t2star(fwhm: f64) -> Result<f64> {
    if !(fwhm > 0.0) {
        return Err(Error::InvalidInput("linewidth must be positive".into()));
    }
    Ok(1.0 / (PI * fwhm))
}

pub fn t2star_linewidth(t2_star: f64) -> Result<f64> {
    if !(t2_star > 0.0) {
        return Err(Error::InvalidInput("T2* must be positive".into()));
    }
    Ok(1.0 / (PI * t2_star))
}

/// Statistical-theory Lorentzian width (Hz) from dilute dipolar coupling:
/// `(2π / 9√3) μ0 h γ_a γ_b n`.
pub fn dipolar_linewidth(density: f64, gamma_a: f64, gamma_b: f64) -> f64 {
    2.0 * PI / (9.0 * 3f64.sqrt()) * MU_0 * PLANCK * gamma_a * gamma_b * density
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::constants::gamma_from_mu_b;

    #[test]
    fn stretched_exp_basics() {
        let p = StretchedExp::new(73e-6, 2.7, 1.0).unwrap();
        assert!((p.eval(73e-6) - (-1.0f64).exp()).abs() < 1e-15);
        assert_eq!(p.eval(0.0), 1.0);
        let e = StretchedExp::new(2.0, 1.0, 3.0).unwrap();
        assert!((e.eval(1.0) - 3.0 * (-0.5f64).exp()).abs() < 1e-15);
        assert!(StretchedExp::new(1.0, 0.5, 1.0).is_err());
        assert!(StretchedExp::new(1.0, 4.1, 1.0).is_err());
    }

    #[test]
    fn t_sd_zero_rates_is_infinite() {
        let p = SdParams { density: 1e23, gamma_central: 1e10, gamma_i: 1e10, gamma_ii: 1e10, rate_i: 0.0, rate_ii: 0.0 };
        let r = t_sd(&p).unwrap();
        assert!(r.t_sd.is_infinite() && r.t_sd_site_i.is_infinite());
    }

    #[test]
    fn t_sd_contributions_add_as_rates() {
        let p = SdParams {
            density: 4.7e23,
            gamma_central: gamma_from_mu_b(2.0),
            gamma_i: gamma_from_mu_b(2.0),
            gamma_ii: gamma_from_mu_b(6.0),
            rate_i: 180.0,
            rate_ii: 3700.0,
        };
        let r = t_sd(&p).unwrap();
        let sum = 1.0 / r.t_sd_site_i + 1.0 / r.t_sd_site_ii;
        assert!((1.0 / r.t_sd - sum).abs() < 1e-12 * sum);
    }

    #[test]
    fn flip_probability_limits() {
        assert!((mean_flip_probability(10e6, 1.0, Lineshape::Gaussian, PI).unwrap() - 1.0).abs() < 1e-9);
        assert!((mean_flip_probability(10e6, 1.0, Lineshape::Lorentzian, PI).unwrap() - 1.0).abs() < 1e-6);
        assert_eq!(mean_flip_probability(10e6, 1e6, Lineshape::Gaussian, 0.0).unwrap(), 0.0);
        assert!(mean_flip_probability(0.0, 1e6, Lineshape::Gaussian, PI).is_err());
    }

    #[test]
    fn id_is_linear_in_flip_and_density() {
        let g = gamma_from_mu_b(2.0);
        let a = t2_id(&IdParams { density_resonant: 1e23, gamma: g, mean_flip: 0.5 }).unwrap();
        let b = t2_id(&IdParams { density_resonant: 2e23, gamma: g, mean_flip: 0.5 }).unwrap();
        let c = t2_id(&IdParams { density_resonant: 1e23, gamma: g, mean_flip: 0.25 }).unwrap();
        assert!((a / b - 2.0).abs() < 1e-12);
        assert!((c / a - 2.0).abs() < 1e-12);
        assert!(t2_id(&IdParams { density_resonant: 1e23, gamma: g, mean_flip: 0.0 }).unwrap().is_infinite());
        assert!(t2_id(&IdParams { density_resonant: 1e23, gamma: g, mean_flip: 1.5 }).is_err());
    }

    #[test]
    fn id_inversion_round_trip() {
        let g = gamma_from_mu_b(2.1);
        let slope = id_slope(3.3e23, g);
        let n = resonant_density_from_id_slope(slope, g).unwrap();
        assert!((n / 3.3e23 - 1.0).abs() < 1e-12);
    }

    #[test]
    fn stim_echo_limits() {
        let p = StimEchoParams { gamma0: 3e3, gamma_sd: 181e3, rate: 1.8e3, t1: 1.0 / 203.0 };
        assert!((stim_echo_amplitude(&p, 0.0, 2e-3) - (-2e-3 * 203.0f64).exp()).abs() < 1e-15);
        let sat = p.gamma0 + 0.5 * p.gamma_sd * (p.rate * 1e-6 + 1.0);
        assert!((p.gamma_eff(1e-6, 1.0) - sat).abs() < 1e-9 * sat);
        assert!(stim_echo_regime_valid(&p, 1e-6));
        assert!(!stim_echo_regime_valid(&p, 1e-3));
    }

    #[test]
    fn linewidth_conversions() {
        assert!((linewidth_t2star(0.72e6).unwrap() - 442e-9).abs() < 0.01 * 442e-9);
        assert!((linewidth_t2star(200e3).unwrap() - 1.6e-6).abs() < 0.01e-6);
        let t = linewidth_t2star(1.0 / PI).unwrap();
        assert!((t - 1.0).abs() < 1e-15);
        assert!((t2star_linewidth(linewidth_t2star(3.7e5).unwrap()).unwrap() - 3.7e5).abs() < 1e-9);
    }

    #[test]
    fn dipolar_width_is_linear() {
        let (a, b) = (gamma_from_mu_b(2.0), gamma_from_mu_b(6.0));
        assert_eq!(dipolar_linewidth(0.0, a, b), 0.0);
        let w = dipolar_linewidth(4.7e23, a, b);
        assert!((dipolar_linewidth(9.4e23, a, b) / w - 2.0).abs() < 1e-12);
        assert!(w > 1e5 && w < 1e6);
    }
}
