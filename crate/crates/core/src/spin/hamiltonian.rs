use nalgebra::{DMatrix, Matrix3, Vector3};

use super::{CMatrix, Complex64, FieldConfig, SpinSystemSpec};
use crate::constants::MU_B_OVER_H;
use crate::Result;

/// Cartesian spin matrices (x, y, z) for spin `two_j / 2` in the basis
/// m = j, j − 1, …, −j.
pub fn single_spin_matrices(two_j: u8) -> [CMatrix; 3] {
    let dim = usize::from(two_j) + 1;
    let j = f64::from(two_j) / 2.0;
    let m = |k: usize| j - k as f64;
    let mut raise = DMatrix::<Complex64>::zeros(dim, dim);
    for k in 1..dim {
        // ⟨m_{k-1}| S+ |m_k⟩
        let mk = m(k);
        raise[(k - 1, k)] = Complex64::new((j * (j + 1.0) - mk * (mk + 1.0)).sqrt(), 0.0);
    }
    let lower = raise.adjoint();
    let half = Complex64::new(0.5, 0.0);
    let sx = (&raise + &lower) * half;
    let sy = (&raise - &lower) * Complex64::new(0.0, -0.5);
    let sz = DMatrix::from_fn(dim, dim, |r, c| {
        if r == c {
            Complex64::new(m(r), 0.0)
        } else {
            Complex64::new(0.0, 0.0)
        }
    });
    [sx, sy, sz]
}

/// Electron and nuclear spin operators embedded in the product space
/// |m_S⟩ ⊗ |m_I⟩.
#[derive(Debug, Clone)]
pub struct SpinOperators {
    pub s: [CMatrix; 3],
    pub i: [CMatrix; 3],
}

pub fn spin_operators(two_i: u8) -> SpinOperators {
    let s1 = single_spin_matrices(1);
    let i1 = single_spin_matrices(two_i);
    let id_s = CMatrix::identity(2, 2);
    let id_i = CMatrix::identity(usize::from(two_i) + 1, usize::from(two_i) + 1);
    SpinOperators {
        s: s1.map(|m| m.kronecker(&id_i)),
        i: i1.map(|m| id_s.kronecker(&m)),
    }
}

fn real(x: f64) -> Complex64 {
    Complex64::new(x, 0.0)
}

/// Spin Hamiltonian in Hz:
/// H = (μ_B/h) B·g·S + S·A·I + I·Q·I − γ_n B·I.
pub fn build_hamiltonian(spec: &SpinSystemSpec, field: &FieldConfig) -> Result<CMatrix> {
    spec.validate()?;
    let ops = spin_operators(spec.two_i);
    Ok(hamiltonian_from_ops(spec, &ops, &field.vector()))
}

pub(crate) fn hamiltonian_from_ops(spec: &SpinSystemSpec, ops: &SpinOperators, b: &Vector3<f64>) -> CMatrix {
    let dim = spec.dimension();
    let mut h = CMatrix::zeros(dim, dim);
    // Zeeman: effective field vector (gᵀB) couples to S.
    let zeeman = spec.g.transpose() * b * MU_B_OVER_H;
    for k in 0..3 {
        h += &ops.s[k] * real(zeeman[k]);
        h -= &ops.i[k] * real(spec.gamma_n * b[k]);
    }
    if spec.two_i > 0 {
        add_bilinear(&mut h, &spec.a, &ops.s, &ops.i);
        if let Some(q) = &spec.q {
            add_bilinear(&mut h, q, &ops.i, &ops.i);
        }
    }
    // Symmetrise away round-off.
    (&h + h.adjoint()) * real(0.5)
}

fn add_bilinear(h: &mut CMatrix, t: &Matrix3<f64>, left: &[CMatrix; 3], right: &[CMatrix; 3]) {
    for r in 0..3 {
        for c in 0..3 {
            let v = t[(r, c)];
            if v != 0.0 {
                *h += (&left[r] * &right[c]) * real(v);
            }
        }
    }
}

/// Magnetic-dipole drive operator for a unit drive axis `u`, in units of μ_B:
/// (gᵀu)·S − (h γ_n / μ_B) u·I.
pub fn moment_operator(spec: &SpinSystemSpec, u: &Vector3<f64>) -> CMatrix {
    let ops = spin_operators(spec.two_i);
    moment_operator_from_ops(spec, &ops, u)
}

pub(crate) fn moment_operator_from_ops(spec: &SpinSystemSpec, ops: &SpinOperators, u: &Vector3<f64>) -> CMatrix {
    let dim = spec.dimension();
    let gu = spec.g.transpose() * u;
    let nuclear = spec.gamma_n / MU_B_OVER_H;
    let mut m = CMatrix::zeros(dim, dim);
    for k in 0..3 {
        m += &ops.s[k] * real(gu[k]);
        m -= &ops.i[k] * real(nuclear * u[k]);
    }
    m
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::spin::{axes, eigensystem, Site};

    fn commutator(a: &CMatrix, b: &CMatrix) -> CMatrix {
        a * b - b * a
    }

    #[test]
    fn spin_algebra_holds() {
        for two_j in [1u8, 2, 5] {
            let [x, y, z] = single_spin_matrices(two_j);
            let i = Complex64::new(0.0, 1.0);
            assert!((commutator(&x, &y) - &z * i).camax() < 1e-12);
            let j = f64::from(two_j) / 2.0;
            let casimir = &x * &x + &y * &y + &z * &z;
            let expected = CMatrix::identity(x.nrows(), x.nrows()) * real(j * (j + 1.0));
            assert!((casimir - expected).camax() < 1e-12);
        }
    }

    #[test]
    fn isotropic_zeeman_splitting() {
        let spec = SpinSystemSpec::electron_only("e", Matrix3::identity() * 2.0, 1.0, Site::I);
        let field = FieldConfig::new(0.35, axes::b()).unwrap();
        let levels = eigensystem(&build_hamiltonian(&spec, &field).unwrap()).unwrap();
        let split = levels.energies[1] - levels.energies[0];
        assert!((split / (2.0 * MU_B_OVER_H * 0.35) - 1.0).abs() < 1e-12);
        assert!((split / 9.797e9 - 1.0).abs() < 1e-3);
    }

    #[test]
    fn principal_axis_scaling() {
        let g = Matrix3::from_diagonal(&Vector3::new(6.0, 1.0, 1.0));
        let spec = SpinSystemSpec::electron_only("e", g, 1.0, Site::I);
        let unit = SpinSystemSpec::electron_only("e1", Matrix3::identity(), 1.0, Site::I);
        let field = FieldConfig::new(0.2, axes::d1()).unwrap();
        let split = |s: &SpinSystemSpec| {
            let l = eigensystem(&build_hamiltonian(s, &field).unwrap()).unwrap();
            l.energies[1] - l.energies[0]
        };
        assert!((split(&spec) / split(&unit) - 6.0).abs() < 1e-12);
    }

    #[test]
    fn isotropic_hyperfine_zero_field() {
        // I = 1/2, A·S·I at B = 0: triplet at +a/4, singlet at −3a/4.
        let a = 1.3e9;
        let spec = SpinSystemSpec {
            label: "hf".into(),
            two_i: 1,
            abundance: 1.0,
            g: Matrix3::identity() * 2.0,
            a: Matrix3::identity() * a,
            q: None,
            gamma_n: 0.0,
            site: Site::I,
        };
        let field = FieldConfig::new(0.0, axes::b()).unwrap();
        let e = eigensystem(&build_hamiltonian(&spec, &field).unwrap()).unwrap().energies;
        assert!((e[0] + 0.75 * a).abs() < 1e-6 * a);
        for k in 1..4 {
            assert!((e[k] - 0.25 * a).abs() < 1e-6 * a);
        }
        assert!(((e[1] - e[0]) / a - 1.0).abs() < 1e-12);
    }

    #[test]
    fn rejects_asymmetric_hyperfine() {
        let mut a = Matrix3::identity() * 1e8;
        a[(0, 1)] = 1e6;
        let spec = SpinSystemSpec {
            label: "bad".into(),
            two_i: 1,
            abundance: 0.5,
            g: Matrix3::identity(),
            a,
            q: None,
            gamma_n: 0.0,
            site: Site::I,
        };
        let field = FieldConfig::new(0.1, axes::b()).unwrap();
        assert!(matches!(build_hamiltonian(&spec, &field), Err(crate::Error::InvalidSpec { .. })));
    }
}
