//! Independent eigenvalue oracle: Sylvester inertia of H − σI counted via an
//! unpivoted LDL* factorisation, with bisection on σ.

use nalgebra::{DMatrix, Matrix3, Vector3};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use spinlab::constants::{MU_B_OVER_H, PLANCK, BOHR_MAGNETON};
use spinlab::spin::{
    axes, build_hamiltonian, eigensystem, g_effective, resonant_fields, CMatrix, Complex64, ResonanceSearch,
};
use spinlab::{FieldConfig, Site, SpinSystemSpec, TransitionKind};

/// Number of eigenvalues of `h` below `sigma`.
fn count_below(h: &CMatrix, sigma: f64) -> usize {
    let n = h.nrows();
    let mut a: DMatrix<Complex64> = h.clone();
    for i in 0..n {
        a[(i, i)] -= Complex64::new(sigma, 0.0);
    }
    let mut negatives = 0;
    let mut l = DMatrix::<Complex64>::identity(n, n);
    let mut d = vec![0.0f64; n];
    for j in 0..n {
        let mut dj = a[(j, j)].re;
        for k in 0..j {
            dj -= (l[(j, k)] * l[(j, k)].conj()).re * d[k];
        }
        if dj.abs() < 1e-300 {
            dj = 1e-300;
        }
        d[j] = dj;
        if dj < 0.0 {
            negatives += 1;
        }
        for i in j + 1..n {
            let mut v = a[(i, j)];
            for k in 0..j {
                v -= l[(i, k)] * l[(j, k)].conj() * d[k];
            }
            l[(i, j)] = v / dj;
        }
    }
    negatives
}

fn oracle_eigenvalues(h: &CMatrix) -> Vec<f64> {
    let n = h.nrows();
    let bound: f64 = (0..n).map(|i| (0..n).map(|j| h[(i, j)].norm()).sum::<f64>()).fold(0.0, f64::max);
    let tol = 1e-12 * bound.max(1.0);
    (0..n)
        .map(|k| {
            let (mut lo, mut hi) = (-bound - 1.0, bound + 1.0);
            while hi - lo > tol {
                let mid = 0.5 * (lo + hi);
                if count_below(h, mid) > k {
                    hi = mid;
                } else {
                    lo = mid;
                }
            }
            0.5 * (lo + hi)
        })
        .collect()
}

fn random_spec(rng: &mut ChaCha8Rng) -> SpinSystemSpec {
    let mut sym = |scale: f64| {
        let m = Matrix3::from_fn(|_, _| rng.random_range(-1.0..1.0) * scale);
        (m + m.transpose()) * 0.5
    };
    let g = sym(1.5) + Matrix3::identity() * 2.5;
    let a = sym(2e9);
    let q = sym(1e8);
    let q = q - Matrix3::identity() * (q.trace() / 3.0);
    let two_i = rng.random_range(0..=7u8);
    SpinSystemSpec {
        label: "random".into(),
        two_i,
        abundance: 1.0,
        g,
        a: if two_i > 0 { a } else { Matrix3::zeros() },
        q: (two_i > 1).then_some(q),
        gamma_n: rng.random_range(-1e7..1e7),
        site: Site::II,
    }
}

#[test]
fn eigenvalues_match_inertia_bisection() {
    let mut rng = ChaCha8Rng::seed_from_u64(21);
    for _ in 0..60 {
        let spec = random_spec(&mut rng);
        let dir = Vector3::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0));
        let field = FieldConfig::along(rng.random_range(0.0..1.2), dir).unwrap();
        let h = build_hamiltonian(&spec, &field).unwrap();
        let got = eigensystem(&h).unwrap().energies;
        let want = oracle_eigenvalues(&h);
        let scale = h.norm();
        for (g, w) in got.iter().zip(&want) {
            assert!((g - w).abs() <= 1e-9 * scale, "2I={} {g} vs {w}", spec.two_i);
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn electron_only_resonance_follows_g_eff(
        gx in 0.5f64..8.0, gy in 0.5f64..8.0, gz in 0.5f64..8.0,
        off in -0.3f64..0.3, theta in 0.0f64..180.0,
    ) {
        let g = Matrix3::new(gx, off, 0.0, off, gy, 0.0, 0.0, 0.0, gz);
        let spec = SpinSystemSpec::electron_only("e", g, 1.0, Site::I);
        let dir = axes::tilted_from_b(theta);
        let geff = g_effective(&g, &dir);
        let expected = PLANCK * 9.8e9 / (BOHR_MAGNETON * geff);
        prop_assume!(expected > 0.05 && expected < 2.0);
        let res = resonant_fields(&spec, 9.8e9, (0.01, 2.5), &dir, 0.0, &ResonanceSearch::default()).unwrap();
        let lines: Vec<_> = res.iter().filter(|t| t.kind == TransitionKind::Electron).collect();
        prop_assert_eq!(lines.len(), 1);
        prop_assert!((lines[0].field - expected).abs() < 1e-9);
        prop_assert!((lines[0].frequency - 9.8e9).abs() < 1.0);
    }

    #[test]
    fn spectrum_is_traceless_and_ordered(seed in 0u64..10_000, b in 0.0f64..1.5) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut spec = random_spec(&mut rng);
        spec.q = None;
        let h = build_hamiltonian(&spec, &FieldConfig::new(b, axes::b()).unwrap()).unwrap();
        let lv = eigensystem(&h).unwrap();
        prop_assert!(lv.energies.windows(2).all(|w| w[0] <= w[1]));
        let trace: f64 = lv.energies.iter().sum();
        let scale = lv.energies.iter().map(|e| e.abs()).sum::<f64>().max(1.0);
        prop_assert!(trace.abs() <= 1e-9 * scale);
        // Electron Zeeman bound on the spread for the electron-only case.
        if spec.two_i == 0 {
            let split = lv.energies[1] - lv.energies[0];
            let geff = g_effective(&spec.g, &axes::b());
            prop_assert!((split - geff * MU_B_OVER_H * b).abs() <= 1e-6 * split.max(1.0));
        }
    }
}
