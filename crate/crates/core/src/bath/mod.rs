//! Event-driven Monte Carlo of a central spin dephased by a dilute dipolar
//! bath of independently flipping (telegraph) spins.
//!
//! Bath spins carry `m = ±1/2` and shift the central spin by `D_j m_j` (Hz)
//! with the secular coupling `D_j = (μ0 h / 4π) γ_c γ_j (1 − 3cos²θ_j) / r_j³`.
//! `flip_rate_hz` is the Poisson rate at which a bath spin toggles.

mod engine;
mod sequence;

use serde::{Deserialize, Serialize};

pub use crate::curve::{CurveMetadata, DecayCurve};
pub use engine::{
    fit_mc_curve, sample_bath, simulate_decay, simulate_sequences, BathRealization, McFit, McModel, SimulationOutput,
};
pub use sequence::{make_sequence, sequence_at, PulseEvent, PulsePhase, SequenceKind, SequenceParams, SequenceWindow, Sweep};

use crate::coherence::{dipolar_linewidth, t_sd, SdParams, StimEchoParams};
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BathSpecies {
    pub label: String,
    /// m⁻³.
    #[serde(rename = "density_m3")]
    pub density: f64,
    /// Hz/T.
    #[serde(rename = "gamma_hz_per_t")]
    pub gamma: f64,
    /// Telegraph toggle rate, Hz.
    #[serde(default)]
    pub flip_rate_hz: f64,
    /// Resonant with the pulses (instantaneous diffusion).
    #[serde(default)]
    pub resonant: bool,
    /// Flip probability of a resonant spin at a flagged pulse, ⟨sin²(θ/2)⟩.
    #[serde(default = "one")]
    pub mean_flip: f64,
}

fn one() -> f64 {
    1.0
}

fn default_box_spins() -> usize {
    2000
}

fn default_realizations() -> usize {
    1000
}

fn infinite() -> f64 {
    f64::INFINITY
}

fn is_infinite(v: &f64) -> bool {
    v.is_infinite()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BathConfig {
    pub species: Vec<BathSpecies>,
    /// Hz/T.
    #[serde(rename = "gamma_central_hz_per_t")]
    pub gamma_central: f64,
    /// Expected number of bath spins inside the sampling sphere.
    #[serde(default = "default_box_spins")]
    pub box_spins: usize,
    #[serde(default = "default_realizations")]
    pub realizations: usize,
    #[serde(default)]
    pub seed: u64,
    /// Exclusion radius around the central spin, m.
    #[serde(default)]
    pub min_distance_m: f64,
    /// Central-spin lattice relaxation applied over storage intervals, s.
    #[serde(default = "infinite", skip_serializing_if = "is_infinite")]
    pub central_t1_s: f64,
}

impl BathConfig {
    pub fn new(species: Vec<BathSpecies>, gamma_central: f64) -> Self {
        BathConfig {
            species,
            gamma_central,
            box_spins: default_box_spins(),
            realizations: default_realizations(),
            seed: 0,
            min_distance_m: 0.0,
            central_t1_s: f64::INFINITY,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.species.is_empty() {
            return Err(Error::InvalidInput("bath has no species".into()));
        }
        for s in &self.species {
            if !(s.density > 0.0) || !s.density.is_finite() {
                return Err(Error::InvalidInput(format!("species `{}`: density must be positive", s.label)));
            }
            if !s.gamma.is_finite() || !(s.flip_rate_hz >= 0.0) || !s.flip_rate_hz.is_finite() {
                return Err(Error::InvalidInput(format!("species `{}`: invalid γ or flip rate", s.label)));
            }
            if !(0.0..=1.0).contains(&s.mean_flip) {
                return Err(Error::InvalidInput(format!("species `{}`: mean_flip outside [0, 1]", s.label)));
            }
        }
        if self.realizations == 0 {
            return Err(Error::InvalidInput("realizations must be ≥ 1".into()));
        }
        if self.box_spins == 0 {
            return Err(Error::InvalidInput("box_spins must be ≥ 1".into()));
        }
        if !self.gamma_central.is_finite() || !(self.min_distance_m >= 0.0) || !(self.central_t1_s > 0.0) {
            return Err(Error::InvalidInput("invalid central-spin parameters".into()));
        }
        Ok(())
    }

    pub fn total_density(&self) -> f64 {
        self.species.iter().map(|s| s.density).sum()
    }

    /// Radius giving `box_spins` expected spins between `min_distance_m`
    /// and the sphere surface.
    pub fn box_radius(&self) -> f64 {
        let v = self.box_spins as f64 / self.total_density();
        (3.0 * v / (4.0 * std::f64::consts::PI) + self.min_distance_m.powi(3)).cbrt()
    }

    /// Lorentzian width (Hz) each species imposes on the central spin.
    pub fn species_linewidths(&self) -> Vec<f64> {
        self.species.iter().map(|s| dipolar_linewidth(s.density, self.gamma_central, s.gamma)).collect()
    }

    /// Lorentz-diffusion spectral-diffusion time of the flipping species.
    /// The closed form counts the rate at which a spin returns to a given
    /// state, four times the toggle rate.
    pub fn predicted_t_sd(&self) -> Result<f64> {
        let mut inv = 0.0;
        for s in self.species.iter().filter(|s| !s.resonant) {
            let p = t_sd(&SdParams {
                density: s.density,
                gamma_central: self.gamma_central,
                gamma_i: s.gamma,
                gamma_ii: 0.0,
                rate_i: 4.0 * s.flip_rate_hz,
                rate_ii: 0.0,
            })?;
            inv += 1.0 / p.t_sd;
        }
        Ok(if inv > 0.0 { 1.0 / inv } else { f64::INFINITY })
    }

    /// Two-site closed-form parameters for a bath of two species sharing a
    /// density.
    pub fn sd_params(&self) -> Result<SdParams> {
        let flipping: Vec<&BathSpecies> = self.species.iter().filter(|s| !s.resonant).collect();
        match flipping.as_slice() {
            [a, b] if (a.density - b.density).abs() <= 1e-12 * a.density => Ok(SdParams {
                density: a.density,
                gamma_central: self.gamma_central,
                gamma_i: a.gamma,
                gamma_ii: b.gamma,
                rate_i: 4.0 * a.flip_rate_hz,
                rate_ii: 4.0 * b.flip_rate_hz,
            }),
            _ => Err(Error::InvalidInput("two flipping species of equal density are required".into())),
        }
    }

    /// Stimulated-echo parameters a single flipping species should produce:
    /// `Γ_SD` is its dipolar width and `R` twice the toggle rate.
    pub fn stim_echo_truth(&self) -> Result<StimEchoParams> {
        let flipping: Vec<&BathSpecies> = self.species.iter().filter(|s| s.flip_rate_hz > 0.0).collect();
        match flipping.as_slice() {
            [s] => Ok(StimEchoParams {
                gamma0: 0.0,
                gamma_sd: dipolar_linewidth(s.density, self.gamma_central, s.gamma),
                rate: 2.0 * s.flip_rate_hz,
                t1: self.central_t1_s,
            }),
            _ => Err(Error::InvalidInput("exactly one flipping species is required".into())),
        }
    }

    /// Instantaneous-diffusion rate (Hz) from the resonant species.
    pub fn predicted_id_rate(&self) -> f64 {
        self.species
            .iter()
            .filter(|s| s.resonant)
            .map(|s| std::f64::consts::PI * dipolar_linewidth(s.density, self.gamma_central, s.gamma) * s.mean_flip)
            .sum()
    }
}
