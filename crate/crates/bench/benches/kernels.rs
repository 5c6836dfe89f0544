use std::hint::black_box;

use criterion::{criterion_group, criterion_main, Criterion};
use spinlab::bath::{make_sequence, simulate_sequences, SequenceParams};
use spinlab::constants::{gamma_from_mu_b, per_cm3};
use spinlab::fitkit::fit_stretched;
use spinlab::relaxation::rate_two_phonon;
use spinlab::spin::{axes, build_hamiltonian, eigensystem, presets, resonant_fields, ResonanceSearch};
use spinlab::{BathConfig, BathSpecies, DecayCurve, FieldConfig, SequenceKind, StretchedExp};

fn spin(c: &mut Criterion) {
    // Largest preset Hilbert space (I = 5/2, 12 levels).
    let spec = presets::site_i_isotopes().into_iter().max_by_key(|s| s.two_i).unwrap();
    let h = build_hamiltonian(&spec, &FieldConfig::new(0.35, axes::b()).unwrap()).unwrap();
    c.bench_function("eigensystem_12", |b| b.iter(|| eigensystem(black_box(&h)).unwrap()));
    c.bench_function("resonant_fields_12", |b| {
        b.iter(|| resonant_fields(&spec, 9.8e9, (0.05, 1.5), &axes::b(), 0.0, &ResonanceSearch::default()).unwrap())
    });
}

fn relaxation(c: &mut Criterion) {
    c.bench_function("rate_two_phonon", |b| {
        b.iter(|| rate_two_phonon(black_box(1e-3), 120.0, 150.0, black_box(6.0)).unwrap())
    });
}

fn fitting(c: &mut Criterion) {
    let truth = StretchedExp::new(30e-6, 2.2, 1.0).unwrap();
    let t: Vec<f64> = (0..60).map(|k| k as f64 * 1.5e-6).collect();
    let y: Vec<f64> = t.iter().enumerate().map(|(k, &x)| truth.eval(x) + 0.01 * ((k * 7 % 11) as f64 / 5.0 - 1.0)).collect();
    let curve = DecayCurve::new(t, y, None).unwrap();
    c.bench_function("fit_stretched_60", |b| b.iter(|| fit_stretched(black_box(&curve)).unwrap()));
}

fn bath(c: &mut Criterion) {
    let species = |g: f64, r: f64| BathSpecies {
        label: format!("g{g}"),
        density: per_cm3(4.7e17),
        gamma: gamma_from_mu_b(g),
        flip_rate_hz: r,
        resonant: false,
        mean_flip: 1.0,
    };
    let mut cfg = BathConfig::new(vec![species(2.0, 45.0), species(6.0, 925.0)], gamma_from_mu_b(2.0));
    cfg.realizations = 64;
    let seqs: Vec<_> = (1..=8)
        .map(|k| Some(make_sequence(SequenceKind::Hahn, &SequenceParams { tau: k as f64 * 5e-6, ..Default::default() }).unwrap()))
        .collect();
    c.bench_function("hahn_8pts_64real", |b| b.iter(|| simulate_sequences(&cfg, &seqs, Some(1)).unwrap()));
}

criterion_group!(benches, spin, relaxation, fitting, bath);
criterion_main!(benches);
