use nalgebra::SymmetricEigen;

use super::{CMatrix, EnergyLevels};
use crate::{Error, Result};

const HERMITIAN_TOL: f64 = 1e-10;

/// Self-adjoint eigendecomposition with ascending eigenvalues.
pub fn eigensystem(h: &CMatrix) -> Result<EnergyLevels> {
    if h.nrows() != h.ncols() {
        return Err(Error::InvalidInput(format!(
            "Hamiltonian must be square, got {}×{}",
            h.nrows(),
            h.ncols()
        )));
    }
    let scale = h.iter().map(|z| z.norm()).fold(0.0, f64::max).max(f64::MIN_POSITIVE);
    let asym = (h - h.adjoint()).iter().map(|z| z.norm()).fold(0.0, f64::max);
    if asym > HERMITIAN_TOL * scale {
        return Err(Error::NotHermitian(asym / scale));
    }
    let eig = SymmetricEigen::new(h.clone());
    let mut order: Vec<usize> = (0..h.nrows()).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
    let energies = order.iter().map(|&k| eig.eigenvalues[k]).collect();
    let states = CMatrix::from_fn(h.nrows(), h.ncols(), |r, c| eig.eigenvectors[(r, order[c])]);
    Ok(EnergyLevels { energies, states })
}

/// Eigenvalues only, ascending.
pub(crate) fn eigenvalues(h: &CMatrix) -> Vec<f64> {
    let mut e: Vec<f64> = h.clone().symmetric_eigenvalues().iter().copied().collect();
    e.sort_by(f64::total_cmp);
    e
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::spin::Complex64;

    #[test]
    fn diagonal_matrix_sorted() {
        let h = CMatrix::from_diagonal(&nalgebra::DVector::from_vec(vec![
            Complex64::new(3.0, 0.0),
            Complex64::new(-1.0, 0.0),
            Complex64::new(2.0, 0.0),
        ]));
        let l = eigensystem(&h).unwrap();
        assert_eq!(l.energies, vec![-1.0, 2.0, 3.0]);
    }

    #[test]
    fn pauli_x() {
        let c = 4.5e8;
        let h = CMatrix::from_row_slice(
            2,
            2,
            &[Complex64::new(0.0, 0.0), Complex64::new(c, 0.0), Complex64::new(c, 0.0), Complex64::new(0.0, 0.0)],
        );
        let l = eigensystem(&h).unwrap();
        assert!((l.energies[0] + c).abs() < 1e-6 && (l.energies[1] - c).abs() < 1e-6);
    }

    #[test]
    fn rejects_non_hermitian() {
        let h = CMatrix::from_row_slice(
            2,
            2,
            &[Complex64::new(1.0, 0.0), Complex64::new(0.0, 1.0), Complex64::new(0.0, 1.0), Complex64::new(1.0, 0.0)],
        );
        assert!(matches!(eigensystem(&h), Err(Error::NotHermitian(_))));
    }
}
