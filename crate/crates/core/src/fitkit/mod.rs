//! Least-squares engine and the curve-fitting workflows built on it.

mod lm;
mod models;
mod stimecho;

use std::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub use lm::{least_squares, FitProblem, FitResult};
pub use models::{
    model_by_name, nyquist, DampedCosineModel, ExpModel, GaussModel, InversionRecoveryModel, Model,
    StretchedExpModel, MODEL_NAMES,
};
pub use stimecho::{fit_stim_echo_global, stim_echo_gradient, StimEchoFit, StimEchoFitOptions, StimEchoSurface};

use crate::coherence::{t2star_linewidth, Lineshape, StretchedExp};
use crate::curve::DecayCurve;
use crate::numerics::mad_noise;
use crate::{Error, Result};

/// A fitted registered model.
#[derive(Debug, Clone)]
pub struct ModelFit {
    pub model: &'static str,
    pub param_names: Vec<&'static str>,
    pub result: FitResult,
}

impl ModelFit {
    pub fn param(&self, name: &str) -> Option<(f64, f64)> {
        let j = self.param_names.iter().position(|n| *n == name)?;
        Some((self.result.params[j], self.result.sigma[j]))
    }

    /// Plain-text report: one `name value sigma` row per parameter.
    pub fn report(&self) -> String {
        let mut s = format!("model {}\n", self.model);
        for (j, name) in self.param_names.iter().enumerate() {
            s += &format!("{name:<16} {:>16.8e} {:>16.8e}\n", self.result.params[j], self.result.sigma[j]);
        }
        s += &format!(
            "chi2/dof {:.4} converged {} iterations {}\n",
            self.result.chi2_dof, self.result.converged, self.result.iterations
        );
        s
    }
}

/// Fits `model` to `(x, y)`; `weights` are 1/σ per point.
pub fn fit_model(
    model: &dyn Model,
    x: &[f64],
    y: &[f64],
    weights: Option<&[f64]>,
    initial: Option<Vec<f64>>,
) -> Result<ModelFit> {
    if x.len() != y.len() {
        return Err(Error::InvalidInput("x and y lengths differ".into()));
    }
    let initial = initial.unwrap_or_else(|| model.initial_guess(x, y));
    let (lower, upper) = model.bounds();
    let np = model.n_params();
    let mut prob = FitProblem::new(x.len(), initial, |p, out| {
        for i in 0..x.len() {
            out[i] = model.eval(p, x[i]) - y[i];
        }
    })
    .with_jacobian(|p, jac| {
        let mut g = vec![0.0; np];
        for (i, &xi) in x.iter().enumerate() {
            model.gradient(p, xi, &mut g);
            for j in 0..np {
                jac[(i, j)] = g[j];
            }
        }
    })
    .with_bounds(lower, upper);
    if let Some(w) = weights {
        prob = prob.with_weights(w.to_vec());
    }
    let result = least_squares(&prob)?;
    Ok(ModelFit { model: model.name(), param_names: model.param_names().to_vec(), result })
}

/// Fits a curve, using its standard errors as weights when all are positive.
pub fn fit_curve(model: &dyn Model, curve: &DecayCurve) -> Result<ModelFit> {
    curve.validate()?;
    let w = curve.weights();
    fit_model(model, &curve.abscissa, &curve.amplitude, w.as_deref(), None)
}

/// Residual-resampling bootstrap of parameter uncertainties, for small data
/// sets where the curvature estimate is doubtful.
pub fn bootstrap_sigma(model: &dyn Model, x: &[f64], y: &[f64], resamples: usize, seed: u64) -> Result<Vec<f64>> {
    let base = fit_model(model, x, y, None, None)?;
    let fitted: Vec<f64> = x.iter().map(|&t| model.eval(&base.result.params, t)).collect();
    let resid: Vec<f64> = y.iter().zip(&fitted).map(|(a, b)| a - b).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let np = model.n_params();
    let mut samples: Vec<Vec<f64>> = Vec::with_capacity(resamples);
    for _ in 0..resamples.max(2) {
        let yb: Vec<f64> = fitted.iter().map(|f| f + resid[rng.random_range(0..resid.len())]).collect();
        if let Ok(fit) = fit_model(model, x, &yb, None, Some(base.result.params.clone())) {
            samples.push(fit.result.params);
        }
    }
    if samples.len() < 2 {
        return Err(Error::FitFailure { iterations: 0, reason: "bootstrap resamples did not converge".into() });
    }
    Ok((0..np)
        .map(|j| {
            let v: Vec<f64> = samples.iter().map(|s| s[j]).collect();
            crate::numerics::std_dev(&v)
        })
        .collect())
}

pub fn fit_stretched(curve: &DecayCurve) -> Result<(StretchedExp, ModelFit)> {
    let fit = fit_curve(&StretchedExpModel, curve)?;
    let p = &fit.result.params;
    Ok((StretchedExp { a0: p[0], t2: p[1], n: p[2] }, fit))
}

#[derive(Debug, Clone)]
pub struct InversionRecoveryFit {
    pub t1: f64,
    pub t1_sigma: f64,
    pub k: f64,
    pub k_sigma: f64,
    pub a0: f64,
    /// Consecutive points move against the recovery by more than the noise.
    pub monotonicity_violation: bool,
    /// Neither a sign change nor a recovered tail was observed.
    pub unsaturated: bool,
    pub fit: ModelFit,
}

pub fn fit_inversion_recovery(curve: &DecayCurve) -> Result<InversionRecoveryFit> {
    if curve.len() < 4 {
        return Err(Error::InvalidInput("inversion recovery needs at least 4 points".into()));
    }
    let fit = fit_curve(&InversionRecoveryModel, curve)?;
    let p = fit.result.params.clone();
    let mut idx: Vec<usize> = (0..curve.len()).collect();
    idx.sort_by(|&a, &b| curve.abscissa[a].total_cmp(&curve.abscissa[b]));
    let ys: Vec<f64> = idx.iter().map(|&i| curve.amplitude[i] * p[0].signum()).collect();
    let noise = {
        let est = mad_noise(&ys);
        let se = curve.stderr.iter().cloned().fold(0.0, f64::max);
        est.max(se).max(1e-12 * p[0].abs())
    };
    let monotonicity_violation = ys.windows(2).any(|w| w[1] - w[0] < -4.0 * noise);
    let sign_change = ys.iter().any(|v| *v < 0.0) && ys.iter().any(|v| *v > 0.0);
    let t_max = curve.abscissa.iter().cloned().fold(0.0, f64::max);
    let unsaturated = !sign_change && p[2] > t_max / 3.0;
    Ok(InversionRecoveryFit {
        t1: p[2],
        t1_sigma: fit.result.sigma[2],
        k: p[1],
        k_sigma: fit.result.sigma[1],
        a0: p[0],
        monotonicity_violation,
        unsaturated,
        fit,
    })
}

#[derive(Debug, Clone)]
pub struct RabiFit {
    pub rabi_freq: f64,
    pub rabi_freq_sigma: f64,
    /// Duration of a π pulse, 1/(2f).
    pub pi_time: f64,
    /// `f64::INFINITY` when no damping is resolved.
    pub decay_time: f64,
    pub amplitude: f64,
    pub offset: f64,
    /// Fitted frequency sits close to the sampling Nyquist limit.
    pub aliased: bool,
    /// Fewer than two periods inside the sampled window.
    pub too_few_periods: bool,
    pub fit: ModelFit,
}

pub fn fit_rabi(curve: &DecayCurve) -> Result<RabiFit> {
    if curve.len() < 5 {
        return Err(Error::InvalidInput("Rabi fit needs at least 5 points".into()));
    }
    let fit = fit_curve(&DampedCosineModel, curve)?;
    let p = fit.result.params.clone();
    let nyq = nyquist(&curve.abscissa);
    let t_min = curve.abscissa.iter().cloned().fold(f64::INFINITY, f64::min);
    let t_max = curve.abscissa.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let lambda = p[2];
    let lambda_sigma = fit.result.sigma[2];
    let decay_time = if lambda * (t_max - t_min) < 1e-6 || lambda < lambda_sigma {
        f64::INFINITY
    } else {
        1.0 / lambda
    };
    Ok(RabiFit {
        rabi_freq: p[1],
        rabi_freq_sigma: fit.result.sigma[1],
        pi_time: 0.5 / p[1],
        decay_time,
        amplitude: p[0],
        offset: p[3],
        aliased: p[1] > 0.8 * nyq,
        too_few_periods: p[1] * (t_max - t_min) < 2.0,
        fit,
    })
}

#[derive(Debug, Clone)]
pub struct RamseyFit {
    pub t2_star: f64,
    pub t2_star_sigma: f64,
    /// Implied FWHM of the inhomogeneous line, Hz.
    pub fwhm: f64,
    /// Preferred lineshape (lower χ²).
    pub lineshape: Lineshape,
    pub exponential: ModelFit,
    pub gaussian: ModelFit,
    pub non_decaying: bool,
}

/// Gaussian free-induction decay exp[−(t/T)²] ↔ Gaussian line FWHM.
pub fn gaussian_t2star_linewidth(t: f64) -> f64 {
    2.0 * 2f64.ln().sqrt() / (PI * t)
}

pub fn fit_ramsey(curve: &DecayCurve) -> Result<RamseyFit> {
    if curve.len() < 4 {
        return Err(Error::InvalidInput("Ramsey fit needs at least 4 points".into()));
    }
    let exponential = fit_curve(&ExpModel, curve)?;
    let gaussian = fit_curve(&GaussModel, curve)?;
    let lineshape = if exponential.result.chi2 <= gaussian.result.chi2 {
        Lineshape::Lorentzian
    } else {
        Lineshape::Gaussian
    };
    let (t2_star, t2_star_sigma, fwhm) = match lineshape {
        Lineshape::Lorentzian => {
            let t = exponential.result.params[1];
            (t, exponential.result.sigma[1], t2star_linewidth(t)?)
        }
        Lineshape::Gaussian => {
            let t = gaussian.result.params[1];
            (t, gaussian.result.sigma[1], gaussian_t2star_linewidth(t))
        }
    };
    let mut idx: Vec<usize> = (0..curve.len()).collect();
    idx.sort_by(|&a, &b| curve.abscissa[a].total_cmp(&curve.abscissa[b]));
    let first = curve.amplitude[idx[0]].abs();
    let last = curve.amplitude[*idx.last().unwrap()].abs();
    Ok(RamseyFit {
        t2_star,
        t2_star_sigma,
        fwhm,
        lineshape,
        exponential,
        gaussian,
        non_decaying: last > 0.9 * first,
    })
}
