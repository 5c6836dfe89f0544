//! Registered one-dimensional fit models with analytic gradients.

use std::f64::consts::PI;

/// A scalar model `y = f(p; x)`.
pub trait Model: Send + Sync {
    fn name(&self) -> &'static str;
    fn param_names(&self) -> &'static [&'static str];
    fn eval(&self, p: &[f64], x: f64) -> f64;
    /// ∂f/∂p at `x`, written into `grad`.
    fn gradient(&self, p: &[f64], x: f64, grad: &mut [f64]);
    fn initial_guess(&self, x: &[f64], y: &[f64]) -> Vec<f64>;
    fn bounds(&self) -> (Vec<f64>, Vec<f64>);

    fn n_params(&self) -> usize {
        self.param_names().len()
    }
}

pub const MODEL_NAMES: [&str; 5] = ["stretched", "exp", "gauss", "inversion_recovery", "rabi"];

pub fn model_by_name(name: &str) -> Option<Box<dyn Model>> {
    match name {
        "stretched" => Some(Box::new(StretchedExpModel)),
        "exp" => Some(Box::new(ExpModel)),
        "gauss" => Some(Box::new(GaussModel)),
        "inversion_recovery" => Some(Box::new(InversionRecoveryModel)),
        "rabi" => Some(Box::new(DampedCosineModel)),
        _ => None,
    }
}

const INF: f64 = f64::INFINITY;
const TINY: f64 = 1e-300;

fn span(x: &[f64]) -> f64 {
    let lo = x.iter().cloned().fold(INF, f64::min);
    let hi = x.iter().cloned().fold(-INF, f64::max);
    (hi - lo).max(TINY)
}

/// Amplitude at the smallest abscissa.
fn first_amplitude(x: &[f64], y: &[f64]) -> f64 {
    let i = (0..x.len()).min_by(|&a, &b| x[a].total_cmp(&x[b])).unwrap_or(0);
    y.get(i).copied().unwrap_or(1.0)
}

/// First abscissa where `|y| / |a0|` falls below `level`, linearly
/// interpolated; falls back to half the span.
fn crossing_time(x: &[f64], y: &[f64], a0: f64, level: f64) -> f64 {
    let mut idx: Vec<usize> = (0..x.len()).collect();
    idx.sort_by(|&a, &b| x[a].total_cmp(&x[b]));
    let r = |i: usize| y[i] / a0;
    for w in idx.windows(2) {
        let (i, j) = (w[0], w[1]);
        if r(i) >= level && r(j) < level {
            let f = (r(i) - level) / (r(i) - r(j));
            return (x[i] + f * (x[j] - x[i])).max(TINY);
        }
    }
    0.5 * span(x)
}

/// `A0 exp[−(t/T2)ⁿ]`, parameters `[A0, T2, n]`.
pub struct StretchedExpModel;

impl Model for StretchedExpModel {
    fn name(&self) -> &'static str {
        "stretched"
    }
    fn param_names(&self) -> &'static [&'static str] {
        &["A0", "T2_s", "n"]
    }
    fn eval(&self, p: &[f64], x: f64) -> f64 {
        p[0] * (-(x.max(0.0) / p[1]).powf(p[2])).exp()
    }
    fn gradient(&self, p: &[f64], x: f64, g: &mut [f64]) {
        let s = x.max(0.0) / p[1];
        let u = s.powf(p[2]);
        let e = (-u).exp();
        g[0] = e;
        g[1] = p[0] * e * u * p[2] / p[1];
        g[2] = if s > 0.0 { -p[0] * e * u * s.ln() } else { 0.0 };
    }
    fn initial_guess(&self, x: &[f64], y: &[f64]) -> Vec<f64> {
        let a0 = first_amplitude(x, y);
        let t2 = crossing_time(x, y, a0, (-1.0f64).exp());
        // ln(−ln(y/A0)) = n ln t − n ln T2 over the informative range.
        let pts: Vec<(f64, f64)> = x
            .iter()
            .zip(y)
            .filter_map(|(&t, &v)| {
                let r = v / a0;
                (t > 0.0 && r > 0.05 && r < 0.95).then(|| (t.ln(), (-r.ln()).ln()))
            })
            .collect();
        let n = if pts.len() >= 2 {
            let mx = pts.iter().map(|p| p.0).sum::<f64>() / pts.len() as f64;
            let my = pts.iter().map(|p| p.1).sum::<f64>() / pts.len() as f64;
            let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
            let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
            if sxx > 0.0 { sxy / sxx } else { 1.5 }
        } else {
            1.5
        };
        vec![a0, t2, n.clamp(0.6, 3.9)]
    }
    fn bounds(&self) -> (Vec<f64>, Vec<f64>) {
        (vec![-INF, TINY, 0.5], vec![INF, INF, 4.0])
    }
}

/// `A0 exp(−t/T)`, parameters `[A0, T]`.
pub struct ExpModel;

impl Model for ExpModel {
    fn name(&self) -> &'static str {
        "exp"
    }
    fn param_names(&self) -> &'static [&'static str] {
        &["A0", "T_s"]
    }
    fn eval(&self, p: &[f64], x: f64) -> f64 {
        p[0] * (-x / p[1]).exp()
    }
    fn gradient(&self, p: &[f64], x: f64, g: &mut [f64]) {
        let e = (-x / p[1]).exp();
        g[0] = e;
        g[1] = p[0] * e * x / (p[1] * p[1]);
    }
    fn initial_guess(&self, x: &[f64], y: &[f64]) -> Vec<f64> {
        let a0 = first_amplitude(x, y);
        vec![a0, crossing_time(x, y, a0, (-1.0f64).exp())]
    }
    fn bounds(&self) -> (Vec<f64>, Vec<f64>) {
        (vec![-INF, TINY], vec![INF, INF])
    }
}

/// `A0 exp[−(t/T)²]`, parameters `[A0, T]`.
pub struct GaussModel;

impl Model for GaussModel {
    fn name(&self) -> &'static str {
        "gauss"
    }
    fn param_names(&self) -> &'static [&'static str] {
        &["A0", "T_s"]
    }
    fn eval(&self, p: &[f64], x: f64) -> f64 {
        p[0] * (-(x / p[1]).powi(2)).exp()
    }
    fn gradient(&self, p: &[f64], x: f64, g: &mut [f64]) {
        let s = x / p[1];
        let e = (-s * s).exp();
        g[0] = e;
        g[1] = p[0] * e * 2.0 * s * s / p[1];
    }
    fn initial_guess(&self, x: &[f64], y: &[f64]) -> Vec<f64> {
        let a0 = first_amplitude(x, y);
        vec![a0, crossing_time(x, y, a0, (-1.0f64).exp())]
    }
    fn bounds(&self) -> (Vec<f64>, Vec<f64>) {
        (vec![-INF, TINY], vec![INF, INF])
    }
}

/// `A0 (1 − 2k e^{−t/T1})`, parameters `[A0, k, T1]`.
pub struct InversionRecoveryModel;

impl Model for InversionRecoveryModel {
    fn name(&self) -> &'static str {
        "inversion_recovery"
    }
    fn param_names(&self) -> &'static [&'static str] {
        &["A0", "k", "T1_s"]
    }
    fn eval(&self, p: &[f64], x: f64) -> f64 {
        p[0] * (1.0 - 2.0 * p[1] * (-x / p[2]).exp())
    }
    fn gradient(&self, p: &[f64], x: f64, g: &mut [f64]) {
        let e = (-x / p[2]).exp();
        g[0] = 1.0 - 2.0 * p[1] * e;
        g[1] = -2.0 * p[0] * e;
        g[2] = -2.0 * p[0] * p[1] * e * x / (p[2] * p[2]);
    }
    fn initial_guess(&self, x: &[f64], y: &[f64]) -> Vec<f64> {
        let mut idx: Vec<usize> = (0..x.len()).collect();
        idx.sort_by(|&a, &b| x[a].total_cmp(&x[b]));
        let tail = (idx.len() / 8).max(1);
        let a0 = idx[idx.len() - tail..].iter().map(|&i| y[i]).sum::<f64>() / tail as f64;
        let y0 = y[idx[0]];
        let k = ((1.0 - y0 / a0) / 2.0).clamp(0.05, 1.0);
        // (A0 − y)/(A0 − y0) decays as e^{−t/T1}.
        let rel: Vec<f64> = idx.iter().map(|&i| (a0 - y[i]) / (a0 - y0)).collect();
        let xs: Vec<f64> = idx.iter().map(|&i| x[i]).collect();
        let t1 = crossing_time(&xs, &rel, 1.0, (-1.0f64).exp());
        vec![a0, k, t1]
    }
    fn bounds(&self) -> (Vec<f64>, Vec<f64>) {
        (vec![-INF, 0.0, TINY], vec![INF, 1.5, INF])
    }
}

/// `A e^{−λt} cos(2π f t) + c`, parameters `[A, f_Hz, λ_Hz, c]`.
pub struct DampedCosineModel;

impl DampedCosineModel {
    /// Peak of the periodogram of the mean-removed data over (0, Nyquist].
    pub fn dominant_frequency(x: &[f64], y: &[f64]) -> f64 {
        let n = x.len();
        let m = y.iter().sum::<f64>() / n as f64;
        let nyq = nyquist(x);
        let df = 1.0 / (8.0 * span(x));
        let steps = ((nyq / df).ceil() as usize).clamp(16, 200_000);
        let mut best = (0.0, df);
        for k in 1..=steps {
            let f = nyq * k as f64 / steps as f64;
            let (mut c, mut s) = (0.0, 0.0);
            for (t, v) in x.iter().zip(y) {
                let ph = 2.0 * PI * f * t;
                c += (v - m) * ph.cos();
                s += (v - m) * ph.sin();
            }
            let pw = c * c + s * s;
            if pw > best.0 {
                best = (pw, f);
            }
        }
        best.1
    }
}

/// Nyquist frequency of the median sample spacing.
pub fn nyquist(x: &[f64]) -> f64 {
    let mut xs = x.to_vec();
    xs.sort_by(f64::total_cmp);
    let mut d: Vec<f64> = xs.windows(2).map(|w| w[1] - w[0]).filter(|v| *v > 0.0).collect();
    if d.is_empty() {
        return 1.0;
    }
    d.sort_by(f64::total_cmp);
    0.5 / d[d.len() / 2]
}

impl Model for DampedCosineModel {
    fn name(&self) -> &'static str {
        "rabi"
    }
    fn param_names(&self) -> &'static [&'static str] {
        &["A", "f_Hz", "decay_rate_Hz", "offset"]
    }
    fn eval(&self, p: &[f64], x: f64) -> f64 {
        p[0] * (-p[2] * x).exp() * (2.0 * PI * p[1] * x).cos() + p[3]
    }
    fn gradient(&self, p: &[f64], x: f64, g: &mut [f64]) {
        let e = (-p[2] * x).exp();
        let ph = 2.0 * PI * p[1] * x;
        g[0] = e * ph.cos();
        g[1] = -p[0] * e * ph.sin() * 2.0 * PI * x;
        g[2] = -x * p[0] * e * ph.cos();
        g[3] = 1.0;
    }
    fn initial_guess(&self, x: &[f64], y: &[f64]) -> Vec<f64> {
        let n = y.len() as f64;
        let offset = y.iter().sum::<f64>() / n;
        let f = Self::dominant_frequency(x, y);
        let a0 = first_amplitude(x, y) - offset;
        let amp = if a0.abs() > 0.0 { a0 } else { y.iter().map(|v| (v - offset).abs()).fold(0.0, f64::max) };
        vec![amp, f, 0.1 / span(x), offset]
    }
    fn bounds(&self) -> (Vec<f64>, Vec<f64>) {
        (vec![-INF, TINY, 0.0, -INF], vec![INF, INF, INF, INF])
    }
}
