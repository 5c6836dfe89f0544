//! Physical constants (CODATA 2018) and unit helpers.
//!
//! Energies are carried in Hz throughout the crate, fields in tesla and
//! temperatures in kelvin.

/// Planck constant, J s.
pub const PLANCK: f64 = 6.626_070_15e-34;
/// Boltzmann constant, J/K.
pub const BOLTZMANN: f64 = 1.380_649e-23;
/// Bohr magneton, J/T.
pub const BOHR_MAGNETON: f64 = 9.274_010_078_3e-24;
/// Vacuum permeability, N/A².
pub const MU_0: f64 = 1.256_637_062_12e-6;

/// μ_B / h in Hz/T (≈ 13.996 GHz/T).
pub const MU_B_OVER_H: f64 = BOHR_MAGNETON / PLANCK;
/// μ_B / k_B in K/T.
pub const MU_B_OVER_KB: f64 = BOHR_MAGNETON / BOLTZMANN;

/// Density of yttrium sites in Y₂SiO₅, m⁻³.
pub const YSO_Y_DENSITY: f64 = 1.83e28;

/// Converts a gyromagnetic ratio expressed in units of μ_B/h into Hz/T.
pub fn gamma_from_mu_b(units_of_mu_b_over_h: f64) -> f64 {
    units_of_mu_b_over_h * MU_B_OVER_H
}

/// cm⁻³ → m⁻³.
pub fn per_cm3(n: f64) -> f64 {
    n * 1e6
}

/// Natural-abundance ytterbium isotopes relevant for ESR.
pub mod ytterbium {
    /// Combined abundance of the even (I = 0) isotopes.
    pub const ABUNDANCE_I0: f64 = 0.70;
    /// ¹⁷¹Yb abundance (I = 1/2).
    pub const ABUNDANCE_171: f64 = 0.14;
    /// ¹⁷³Yb abundance (I = 5/2).
    pub const ABUNDANCE_173: f64 = 0.16;
    /// ¹⁷¹Yb nuclear gyromagnetic ratio, Hz/T.
    pub const GAMMA_N_171: f64 = 7.499e6;
    /// ¹⁷³Yb nuclear gyromagnetic ratio, Hz/T.
    pub const GAMMA_N_173: f64 = -2.066e6;
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bohr_over_planck() {
        assert!((MU_B_OVER_H / 13.996_245e9 - 1.0).abs() < 1e-7);
    }
}
