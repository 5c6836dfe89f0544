//! Toggling-frame descriptions of pulse sequences.

use std::f64::consts::{FRAC_PI_2, PI};

use serde::{Deserialize, Serialize};

use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SequenceKind {
    Hahn,
    Stimulated,
    Cpmg,
    Xy16,
    Xy16Concatenated,
}

impl std::str::FromStr for SequenceKind {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        Ok(match s {
            "hahn" => SequenceKind::Hahn,
            "stimulated" => SequenceKind::Stimulated,
            "cpmg" => SequenceKind::Cpmg,
            "xy16" => SequenceKind::Xy16,
            "xy16_concatenated" => SequenceKind::Xy16Concatenated,
            other => return Err(Error::InvalidInput(format!("unknown sequence `{other}`"))),
        })
    }
}

impl std::fmt::Display for SequenceKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            SequenceKind::Hahn => "hahn",
            SequenceKind::Stimulated => "stimulated",
            SequenceKind::Cpmg => "cpmg",
            SequenceKind::Xy16 => "xy16",
            SequenceKind::Xy16Concatenated => "xy16_concatenated",
        })
    }
}

/// Pulse phase in the rotating frame.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum PulsePhase {
    X,
    Y,
    MinusX,
    MinusY,
}

impl PulsePhase {
    pub fn angle(self) -> f64 {
        match self {
            PulsePhase::X => 0.0,
            PulsePhase::Y => FRAC_PI_2,
            PulsePhase::MinusX => PI,
            PulsePhase::MinusY => 1.5 * PI,
        }
    }
}

const XY16: [PulsePhase; 16] = {
    use PulsePhase::*;
    [X, Y, X, Y, Y, X, Y, X, MinusX, MinusY, MinusX, MinusY, MinusY, MinusX, MinusY, MinusX]
};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PulseEvent {
    pub time: f64,
    /// Nominal rotation angle, rad.
    pub theta: f64,
    pub phase: PulsePhase,
    /// Resonant bath spins may be flipped by this pulse.
    pub flips_resonant: bool,
}

/// Intervals `[boundaries[k], boundaries[k+1]]` carry toggling signs
/// `weights[k]`; pulses sit on the interior boundaries.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SequenceWindow {
    pub kind: SequenceKind,
    pub boundaries: Vec<f64>,
    pub weights: Vec<i8>,
    pub pulses: Vec<PulseEvent>,
    /// Fractional rotation-angle error of every refocusing pulse.
    pub pulse_error: f64,
}

impl SequenceWindow {
    pub fn duration(&self) -> f64 {
        self.boundaries.last().copied().unwrap_or(0.0)
    }

    /// ∫ s(t) dt.
    pub fn net_weight(&self) -> f64 {
        self.weights
            .iter()
            .enumerate()
            .map(|(k, &w)| f64::from(w) * (self.boundaries[k + 1] - self.boundaries[k]))
            .sum()
    }

    /// Refocuses a static field to within rounding.
    pub fn is_refocusing(&self) -> bool {
        self.net_weight().abs() <= 1e-12 * self.duration().max(f64::MIN_POSITIVE)
    }

    /// Total length of zero-weight (storage) intervals.
    pub fn storage_time(&self) -> f64 {
        self.weights
            .iter()
            .enumerate()
            .filter(|(_, &w)| w == 0)
            .map(|(k, _)| self.boundaries[k + 1] - self.boundaries[k])
            .sum()
    }

    /// Sequences made purely of π refocusing pulses can be propagated with
    /// pulse errors.
    pub fn is_pi_train(&self) -> bool {
        self.kind != SequenceKind::Stimulated
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.weights.len();
        if self.boundaries.len() != n + 1 || self.pulses.len() + 1 != n.max(1) {
            return Err(Error::InvalidInput("sequence boundaries, weights and pulses are inconsistent".into()));
        }
        if self.boundaries.windows(2).any(|w| !(w[1] >= w[0])) || self.boundaries.first() != Some(&0.0) {
            return Err(Error::InvalidInput("sequence boundaries must start at 0 and be ordered".into()));
        }
        if self.weights.iter().any(|w| !matches!(w, -1..=1)) {
            return Err(Error::InvalidInput("weights must be +1, 0 or −1".into()));
        }
        Ok(())
    }
}

/// Inputs for [`make_sequence`]. Unused fields are ignored by a given kind.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SequenceParams {
    /// Half inter-pulse spacing τ, s.
    pub tau: f64,
    /// Storage time of the stimulated echo, s.
    pub tw: f64,
    /// XY16 cycles, or concatenation level for `xy16_concatenated`.
    pub cycles: usize,
    /// Explicit π-pulse count for CPMG, or a truncated XY16 train.
    pub n_pulses: Option<usize>,
    pub pulse_error: f64,
}

impl Default for SequenceParams {
    fn default() -> Self {
        SequenceParams { tau: 0.0, tw: 0.0, cycles: 1, n_pulses: None, pulse_error: 0.0 }
    }
}

fn pi_train(kind: SequenceKind, tau: f64, phases: &[PulsePhase], pulse_error: f64) -> SequenceWindow {
    let n = phases.len();
    let mut boundaries = Vec::with_capacity(n + 2);
    boundaries.push(0.0);
    let mut pulses = Vec::with_capacity(n);
    let mut weights = Vec::with_capacity(n + 1);
    let mut sign = 1i8;
    for (k, &phase) in phases.iter().enumerate() {
        let t = tau * (2 * k + 1) as f64;
        boundaries.push(t);
        weights.push(sign);
        sign = -sign;
        pulses.push(PulseEvent { time: t, theta: PI, phase, flips_resonant: true });
    }
    boundaries.push(2.0 * tau * n as f64);
    weights.push(sign);
    SequenceWindow { kind, boundaries, weights, pulses, pulse_error }
}

/// Builds level-`level` concatenated XY16: level 1 is plain XY16; level L
/// places a level L−1 block in every free-evolution slot.
fn concatenated(tau: f64, level: usize, pulse_error: f64) -> SequenceWindow {
    if level == 1 {
        return pi_train(SequenceKind::Xy16Concatenated, tau, &XY16, pulse_error);
    }
    let inner = concatenated(tau, level - 1, pulse_error);
    let block = inner.duration();
    let mut boundaries = vec![0.0];
    let mut weights = Vec::new();
    let mut pulses = Vec::new();
    let mut sign = 1i8;
    for slot in 0..17 {
        let t0 = block * slot as f64;
        for (k, &w) in inner.weights.iter().enumerate() {
            weights.push(w * sign);
            boundaries.push(t0 + inner.boundaries[k + 1]);
        }
        for p in &inner.pulses {
            pulses.push(PulseEvent { time: t0 + p.time, ..*p });
        }
        if slot < 16 {
            // The outer pulse splits the last interval of this block from the
            // first of the next; keep them as separate intervals.
            pulses.push(PulseEvent { time: t0 + block, theta: PI, phase: XY16[slot], flips_resonant: true });
            sign = -sign;
        }
    }
    SequenceWindow { kind: SequenceKind::Xy16Concatenated, boundaries, weights, pulses, pulse_error }
}

pub fn make_sequence(kind: SequenceKind, params: &SequenceParams) -> Result<SequenceWindow> {
    let p = params;
    if !(p.tau > 0.0) || !p.tau.is_finite() {
        return Err(Error::InvalidInput(format!("τ must be positive, got {}", p.tau)));
    }
    if !p.pulse_error.is_finite() {
        return Err(Error::InvalidInput("pulse error must be finite".into()));
    }
    let w = match kind {
        SequenceKind::Hahn => SequenceWindow {
            kind,
            boundaries: vec![0.0, p.tau, 2.0 * p.tau],
            weights: vec![1, -1],
            pulses: vec![PulseEvent { time: p.tau, theta: PI, phase: PulsePhase::Y, flips_resonant: true }],
            pulse_error: p.pulse_error,
        },
        SequenceKind::Stimulated => {
            if !(p.tw >= 0.0) {
                return Err(Error::InvalidInput("Tw must be ≥ 0".into()));
            }
            let t2 = p.tau + p.tw;
            SequenceWindow {
                kind,
                boundaries: vec![0.0, p.tau, t2, t2 + p.tau],
                weights: vec![1, 0, -1],
                pulses: vec![
                    PulseEvent { time: p.tau, theta: FRAC_PI_2, phase: PulsePhase::X, flips_resonant: false },
                    PulseEvent { time: t2, theta: FRAC_PI_2, phase: PulsePhase::X, flips_resonant: false },
                ],
                pulse_error: p.pulse_error,
            }
        }
        SequenceKind::Cpmg => {
            let n = p.n_pulses.unwrap_or(p.cycles);
            if n == 0 {
                return Err(Error::InvalidInput("CPMG needs at least one pulse".into()));
            }
            pi_train(kind, p.tau, &vec![PulsePhase::X; n], p.pulse_error)
        }
        SequenceKind::Xy16 => {
            let n = match p.n_pulses {
                Some(n) => n,
                None => 16 * p.cycles,
            };
            if n == 0 {
                return Err(Error::InvalidInput("XY16 needs at least one cycle".into()));
            }
            let phases: Vec<PulsePhase> = (0..n).map(|k| XY16[k % 16]).collect();
            pi_train(kind, p.tau, &phases, p.pulse_error)
        }
        SequenceKind::Xy16Concatenated => {
            if p.cycles == 0 || p.cycles > 4 {
                return Err(Error::InvalidInput(format!("concatenation level {} outside 1..=4", p.cycles)));
            }
            concatenated(p.tau, p.cycles, p.pulse_error)
        }
    };
    w.validate()?;
    Ok(w)
}

/// How an abscissa value maps onto sequence timing.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Sweep {
    /// Total evolution time; Hahn sets τ = t/2, π trains set the pulse count
    /// from the fixed τ, concatenated XY16 rescales τ.
    TotalTime,
    /// Stimulated-echo storage time at fixed τ.
    WaitingTime,
}

/// The sequence realised at abscissa value `x`. `x = 0` yields `None`
/// (no evolution, unit amplitude).
pub fn sequence_at(kind: SequenceKind, base: &SequenceParams, sweep: Sweep, x: f64) -> Result<Option<SequenceWindow>> {
    if !(x >= 0.0) || !x.is_finite() {
        return Err(Error::InvalidInput(format!("abscissa must be finite and ≥ 0, got {x}")));
    }
    let mut p = *base;
    match (kind, sweep) {
        (SequenceKind::Stimulated, Sweep::WaitingTime) => {
            p.tw = x;
        }
        (_, Sweep::WaitingTime) => {
            return Err(Error::InvalidInput("waiting-time sweeps apply to stimulated echoes only".into()));
        }
        (_, Sweep::TotalTime) if x == 0.0 => return Ok(None),
        (SequenceKind::Hahn, Sweep::TotalTime) => p.tau = 0.5 * x,
        (SequenceKind::Stimulated, Sweep::TotalTime) => {
            if x <= base.tw {
                return Err(Error::InvalidInput("total time shorter than Tw".into()));
            }
            p.tau = 0.5 * (x - base.tw);
        }
        (SequenceKind::Cpmg | SequenceKind::Xy16, Sweep::TotalTime) => {
            let n = (x / (2.0 * base.tau)).round() as usize;
            if n == 0 {
                return Ok(None);
            }
            p.n_pulses = Some(n);
        }
        (SequenceKind::Xy16Concatenated, Sweep::TotalTime) => {
            let unit = make_sequence(kind, &SequenceParams { tau: 1.0, ..*base })?.duration();
            p.tau = x / unit;
        }
    }
    make_sequence(kind, &p).map(Some)
}
