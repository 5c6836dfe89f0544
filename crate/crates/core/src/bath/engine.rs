//! Realization sampling and event-exact phase integration.

use std::f64::consts::{PI, TAU};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Poisson};
use rayon::prelude::*;

use super::sequence::{sequence_at, SequenceKind, SequenceParams, SequenceWindow, Sweep};
use super::BathConfig;
use crate::coherence::StretchedExp;
use crate::constants::{MU_0, PLANCK};
use crate::curve::{CurveMetadata, DecayCurve};
use crate::fitkit::{fit_model, ExpModel, Model, ModelFit, StretchedExpModel};
use crate::{Error, Result};

/// Realizations summed sequentially inside one parallel work unit.
const CHUNK: usize = 32;

/// One sampled bath. Flip times are stored compressed: spin `j` flips at
/// `flip_times[flip_offsets[j]..flip_offsets[j + 1]]`.
#[derive(Debug, Clone, PartialEq)]
pub struct BathRealization {
    /// Secular coupling to the central spin, Hz.
    pub couplings: Vec<f64>,
    pub species: Vec<usize>,
    /// Initial projection, ±1/2.
    pub initial: Vec<f64>,
    pub flip_offsets: Vec<usize>,
    pub flip_times: Vec<f64>,
}

impl BathRealization {
    pub fn len(&self) -> usize {
        self.couplings.len()
    }

    pub fn is_empty(&self) -> bool {
        self.couplings.is_empty()
    }

    pub fn flips(&self, j: usize) -> &[f64] {
        &self.flip_times[self.flip_offsets[j]..self.flip_offsets[j + 1]]
    }

    /// Central-spin frequency shift at t = 0, Σ D_j m_j (Hz).
    pub fn static_shift(&self) -> f64 {
        self.couplings.iter().zip(&self.initial).map(|(d, m)| d * m).sum()
    }
}

fn stream_rng(seed: u64, index: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index as u64);
    rng
}

fn sample_with(config: &BathConfig, rng: &mut ChaCha8Rng, horizon: f64) -> BathRealization {
    let r_max = config.box_radius();
    let r_min3 = config.min_distance_m.powi(3);
    let span3 = r_max.powi(3) - r_min3;
    let total = config.total_density();
    let prefactor = MU_0 * PLANCK / (4.0 * PI);
    let mut out = BathRealization {
        couplings: Vec::new(),
        species: Vec::new(),
        initial: Vec::new(),
        flip_offsets: vec![0],
        flip_times: Vec::new(),
    };
    for (k, s) in config.species.iter().enumerate() {
        let expected = config.box_spins as f64 * s.density / total;
        let count = match Poisson::new(expected) {
            Ok(p) => p.sample(rng) as usize,
            Err(_) => 0,
        };
        let scale = prefactor * config.gamma_central * s.gamma;
        for _ in 0..count {
            let r3 = r_min3 + rng.random::<f64>() * span3;
            let cos_t = 2.0 * rng.random::<f64>() - 1.0;
            out.couplings.push(scale * (1.0 - 3.0 * cos_t * cos_t) / r3);
            out.species.push(k);
            out.initial.push(if rng.random::<bool>() { 0.5 } else { -0.5 });
            if s.flip_rate_hz > 0.0 {
                let mut t = 0.0;
                loop {
                    t += -(1.0 - rng.random::<f64>()).ln() / s.flip_rate_hz;
                    if t > horizon {
                        break;
                    }
                    out.flip_times.push(t);
                }
            }
            out.flip_offsets.push(out.flip_times.len());
        }
    }
    out
}

/// Draws realization `index`, with telegraph flips generated up to
/// `horizon` seconds. Deterministic in `(config.seed, index)`.
pub fn sample_bath(config: &BathConfig, index: usize, horizon: f64) -> Result<BathRealization> {
    config.validate()?;
    if !(horizon >= 0.0) || !horizon.is_finite() {
        return Err(Error::InvalidInput("horizon must be finite and ≥ 0".into()));
    }
    Ok(sample_with(config, &mut stream_rng(config.seed, index), horizon))
}

/// Piecewise-linear cumulative phase Σ_j 2π D_j ∫ m_j dt of the spins that
/// pulses do not touch.
struct PhaseTrace {
    times: Vec<f64>,
    cum: Vec<f64>,
    field: Vec<f64>,
}

impl PhaseTrace {
    fn build(bath: &BathRealization, include: impl Fn(usize) -> bool) -> Self {
        let mut f0 = 0.0;
        let mut events: Vec<(f64, f64)> = Vec::new();
        for j in 0..bath.len() {
            if !include(j) {
                continue;
            }
            let w = TAU * bath.couplings[j];
            let mut m = bath.initial[j];
            f0 += w * m;
            for &t in bath.flips(j) {
                events.push((t, -2.0 * w * m));
                m = -m;
            }
        }
        events.sort_unstable_by(|a, b| a.0.total_cmp(&b.0));
        let mut times = Vec::with_capacity(events.len() + 1);
        let mut cum = Vec::with_capacity(events.len() + 1);
        let mut field = Vec::with_capacity(events.len() + 1);
        times.push(0.0);
        cum.push(0.0);
        field.push(f0);
        for (t, df) in events {
            let k = times.len() - 1;
            let c = cum[k] + field[k] * (t - times[k]);
            let f = field[k] + df;
            times.push(t);
            cum.push(c);
            field.push(f);
        }
        PhaseTrace { times, cum, field }
    }

    fn at(&self, t: f64) -> f64 {
        let k = self.times.partition_point(|&x| x <= t).max(1) - 1;
        self.cum[k] + self.field[k] * (t - self.times[k])
    }
}

/// ∫ m dt of a telegraph spin at each boundary, walking flips and
/// boundaries together (both sorted).
fn spin_integrals(m0: f64, flips: &[f64], boundaries: &[f64], out: &mut Vec<f64>) {
    out.clear();
    let mut m = m0;
    let mut acc = 0.0;
    let mut last = 0.0;
    let mut fi = 0;
    for &b in boundaries {
        while fi < flips.len() && flips[fi] <= b {
            acc += m * (flips[fi] - last);
            last = flips[fi];
            m = -m;
            fi += 1;
        }
        out.push(acc + m * (b - last));
    }
}

fn rotate_z(v: [f64; 3], phi: f64) -> [f64; 3] {
    let (s, c) = phi.sin_cos();
    [c * v[0] - s * v[1], s * v[0] + c * v[1], v[2]]
}

/// Rotation by `beta` about the in-plane axis at angle `phase` (Rodrigues).
fn rotate_axis(v: [f64; 3], phase: f64, beta: f64) -> [f64; 3] {
    let (ny, nx) = phase.sin_cos();
    let (s, c) = beta.sin_cos();
    let dot = nx * v[0] + ny * v[1];
    let cross = [ny * v[2], -nx * v[2], nx * v[1] - ny * v[0]];
    let n = [nx, ny, 0.0];
    let mut out = [0.0; 3];
    for i in 0..3 {
        out[i] = v[i] * c + cross[i] * s + n[i] * dot * (1.0 - c);
    }
    out
}

fn propagate(seq: &SequenceWindow, phases: &[f64], error: f64) -> [f64; 3] {
    let mut m = [1.0, 0.0, 0.0];
    for (k, &phi) in phases.iter().enumerate() {
        m = rotate_z(m, phi);
        if let Some(p) = seq.pulses.get(k) {
            m = rotate_axis(m, p.phase.angle(), p.theta * (1.0 + error));
        }
    }
    m
}

struct Prepared<'a> {
    seq: &'a SequenceWindow,
    bloch: bool,
    ideal: [f64; 3],
    t1_factor: f64,
}

fn realization_amplitudes(
    config: &BathConfig,
    prepared: &[Option<Prepared<'_>>],
    index: usize,
    horizon: f64,
    out: &mut [f64],
) -> usize {
    let mut rng = stream_rng(config.seed, index);
    let bath = sample_with(config, &mut rng, horizon);
    let pulse_flipped = |j: usize| {
        let s = &config.species[bath.species[j]];
        s.resonant && s.mean_flip > 0.0
    };
    let trace = PhaseTrace::build(&bath, |j| !pulse_flipped(j));
    let flipped: Vec<usize> = (0..bath.len()).filter(|&j| pulse_flipped(j)).collect();
    let mut phases = Vec::new();
    let mut integ = Vec::new();
    for (slot, p) in out.iter_mut().zip(prepared) {
        let Some(p) = p else {
            *slot = 1.0;
            continue;
        };
        let b = &p.seq.boundaries;
        let n_int = p.seq.weights.len();
        phases.clear();
        let mut prev = trace.at(b[0]);
        for k in 0..n_int {
            let next = trace.at(b[k + 1]);
            phases.push(next - prev);
            prev = next;
        }
        for &j in &flipped {
            let p_flip = config.species[bath.species[j]].mean_flip;
            spin_integrals(bath.initial[j], bath.flips(j), b, &mut integ);
            let w = TAU * bath.couplings[j];
            let mut sign = 1.0;
            for k in 0..n_int {
                phases[k] += w * sign * (integ[k + 1] - integ[k]);
                if let Some(pulse) = p.seq.pulses.get(k) {
                    if pulse.flips_resonant && rng.random::<f64>() < p_flip {
                        sign = -sign;
                    }
                }
            }
        }
        let amp = if p.bloch {
            let m = propagate(p.seq, &phases, p.seq.pulse_error);
            m[0] * p.ideal[0] + m[1] * p.ideal[1] + m[2] * p.ideal[2]
        } else {
            let total: f64 = phases.iter().zip(&p.seq.weights).map(|(ph, &w)| ph * f64::from(w)).sum();
            total.cos()
        };
        *slot = amp * p.t1_factor;
    }
    bath.len()
}

/// Ensemble average over realizations for a batch of sequences.
#[derive(Debug, Clone, PartialEq)]
pub struct SimulationOutput {
    pub mean: Vec<f64>,
    pub stderr: Vec<f64>,
    pub warnings: Vec<String>,
    /// Mean number of bath spins per realization.
    pub mean_spins: f64,
}

/// Simulates every sequence (``None`` = no evolution, amplitude 1) on the
/// same set of realizations. Results are bit-identical for any `workers`.
pub fn simulate_sequences(
    config: &BathConfig,
    sequences: &[Option<SequenceWindow>],
    workers: Option<usize>,
) -> Result<SimulationOutput> {
    config.validate()?;
    let mut warnings = Vec::new();
    let mut horizon: f64 = 0.0;
    let mut prepared = Vec::with_capacity(sequences.len());
    for s in sequences {
        let Some(seq) = s else {
            prepared.push(None);
            continue;
        };
        seq.validate()?;
        horizon = horizon.max(seq.duration());
        if !seq.is_refocusing() {
            let msg = format!("{} sequence of length {:.3e} s does not refocus static fields", seq.kind, seq.duration());
            if !warnings.contains(&msg) {
                warnings.push(msg);
            }
        }
        let bloch = seq.pulse_error != 0.0 && seq.is_pi_train();
        if seq.pulse_error != 0.0 && !seq.is_pi_train() {
            let msg = format!("pulse error ignored for {} sequence", seq.kind);
            if !warnings.contains(&msg) {
                warnings.push(msg);
            }
        }
        let ideal = if bloch { propagate(seq, &vec![0.0; seq.weights.len()], 0.0) } else { [1.0, 0.0, 0.0] };
        let t1_factor = if config.central_t1_s.is_finite() { (-seq.storage_time() / config.central_t1_s).exp() } else { 1.0 };
        prepared.push(Some(Prepared { seq, bloch, ideal, t1_factor }));
    }

    let n = config.realizations;
    let np = sequences.len();
    let chunks: Vec<(usize, usize)> = (0..n).step_by(CHUNK).map(|s| (s, (s + CHUNK).min(n))).collect();
    let run = || {
        chunks
            .par_iter()
            .map(|&(lo, hi)| {
                let mut sum = vec![0.0; np];
                let mut sumsq = vec![0.0; np];
                let mut spins = 0usize;
                let mut amps = vec![0.0; np];
                for i in lo..hi {
                    spins += realization_amplitudes(config, &prepared, i, horizon, &mut amps);
                    for k in 0..np {
                        sum[k] += amps[k];
                        sumsq[k] += amps[k] * amps[k];
                    }
                }
                (sum, sumsq, spins)
            })
            .collect::<Vec<_>>()
    };
    let partials = match workers {
        Some(w) => rayon::ThreadPoolBuilder::new()
            .num_threads(w.max(1))
            .build()
            .map_err(|e| Error::InvalidInput(format!("thread pool: {e}")))?
            .install(run),
        None => run(),
    };
    let mut sum = vec![0.0; np];
    let mut sumsq = vec![0.0; np];
    let mut spins = 0usize;
    for (s, q, c) in partials {
        for k in 0..np {
            sum[k] += s[k];
            sumsq[k] += q[k];
        }
        spins += c;
    }
    let nf = n as f64;
    let mean: Vec<f64> = sum.iter().map(|s| s / nf).collect();
    let stderr = if n > 1 {
        sumsq
            .iter()
            .zip(&mean)
            .map(|(q, m)| ((q - nf * m * m).max(0.0) / (nf - 1.0) / nf).sqrt())
            .collect()
    } else {
        vec![0.0; np]
    };
    Ok(SimulationOutput { mean, stderr, warnings, mean_spins: spins as f64 / nf })
}

/// Simulates a decay curve: each abscissa value is mapped onto a sequence
/// through `sweep` (see [`Sweep`]).
pub fn simulate_decay(
    config: &BathConfig,
    kind: SequenceKind,
    params: &SequenceParams,
    sweep: Sweep,
    abscissa: &[f64],
    workers: Option<usize>,
) -> Result<(DecayCurve, SimulationOutput)> {
    let seqs = abscissa
        .iter()
        .map(|&x| sequence_at(kind, params, sweep, x))
        .collect::<Result<Vec<_>>>()?;
    let out = simulate_sequences(config, &seqs, workers)?;
    let curve = DecayCurve {
        abscissa: abscissa.to_vec(),
        amplitude: out.mean.clone(),
        stderr: out.stderr.clone(),
        metadata: CurveMetadata { sequence: kind.to_string(), temperature: None, config_hash: None },
    };
    Ok((curve, out))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum McModel {
    Stretched,
    SimpleExp,
}

#[derive(Debug, Clone)]
pub struct McFit {
    pub decay: StretchedExp,
    pub t2_sigma: f64,
    /// Zero for the simple exponential.
    pub n_sigma: f64,
    /// The curve never decays below 0.9.
    pub unidentifiable: bool,
    pub fit: ModelFit,
}

/// Weighted stretched or simple exponential fit of a Monte Carlo curve.
pub fn fit_mc_curve(curve: &DecayCurve, model: McModel) -> Result<McFit> {
    curve.validate()?;
    if curve.len() < 6 {
        return Err(Error::InvalidInput(format!("need ≥ 6 points, got {}", curve.len())));
    }
    let floor = curve.stderr.iter().cloned().filter(|s| *s > 0.0).fold(f64::INFINITY, f64::min);
    let weights: Option<Vec<f64>> = floor.is_finite().then(|| curve.stderr.iter().map(|s| 1.0 / s.max(floor)).collect());
    let m: &dyn Model = match model {
        McModel::Stretched => &StretchedExpModel,
        McModel::SimpleExp => &ExpModel,
    };
    let fit = fit_model(m, &curve.abscissa, &curve.amplitude, weights.as_deref(), None)?;
    let p = &fit.result.params;
    let (decay, n_sigma) = match model {
        McModel::Stretched => (StretchedExp { a0: p[0], t2: p[1], n: p[2] }, fit.result.sigma[2]),
        McModel::SimpleExp => (StretchedExp { a0: p[0], t2: p[1], n: 1.0 }, 0.0),
    };
    Ok(McFit {
        decay,
        t2_sigma: fit.result.sigma[1],
        n_sigma,
        unidentifiable: curve.amplitude.iter().all(|a| *a > 0.9),
        fit,
    })
}
