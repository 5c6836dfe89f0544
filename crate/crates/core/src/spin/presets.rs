//! Representative Yb³⁺:Y₂SiO₅-like spin systems.
//!
//! The tensors are illustrative: they reproduce the effective g-factors along
//! b (0.686 for site I, ~7.7 for site II) and hyperfine scales of the right
//! order, but they are not fitted literature tensors. Load measured tensors
//! from a config file for quantitative work.

use nalgebra::Matrix3;

use super::{Site, SpinSystemSpec};
use crate::constants::ytterbium::*;

/// Site I g-tensor; |gᵀ b| = 0.686 so the I = 0 line sits at 1020.8 mT for 9.8 GHz.
pub fn site_i_g() -> Matrix3<f64> {
    Matrix3::new(4.2, 0.3, 0.1, 0.3, 1.1, 0.05, 0.1, 0.05, 0.676_747)
}

/// Site II g-tensor; |gᵀ b| ≈ 7.74.
pub fn site_ii_g() -> Matrix3<f64> {
    Matrix3::new(1.0, 0.1, 0.3, 0.1, 0.8, 0.2, 0.3, 0.2, 7.73)
}

fn isotope_set(site: Site, g: Matrix3<f64>, a_over_g_171: f64) -> Vec<SpinSystemSpec> {
    let a171 = g * a_over_g_171;
    let a173 = a171 * (GAMMA_N_173 / GAMMA_N_171);
    let tag = site.to_string();
    vec![
        SpinSystemSpec::electron_only(format!("Yb-even/{tag}"), g, ABUNDANCE_I0, site),
        SpinSystemSpec {
            label: format!("Yb171/{tag}"),
            two_i: 1,
            abundance: ABUNDANCE_171,
            g,
            a: a171,
            q: None,
            gamma_n: GAMMA_N_171,
            site,
        },
        SpinSystemSpec {
            label: format!("Yb173/{tag}"),
            two_i: 5,
            abundance: ABUNDANCE_173,
            g,
            a: a173,
            q: None,
            gamma_n: GAMMA_N_173,
            site,
        },
    ]
}

/// Natural-abundance isotope set {I = 0, ¹⁷¹Yb, ¹⁷³Yb} in site I.
pub fn site_i_isotopes() -> Vec<SpinSystemSpec> {
    isotope_set(Site::I, site_i_g(), 0.75e9)
}

/// Natural-abundance isotope set in site II.
pub fn site_ii_isotopes() -> Vec<SpinSystemSpec> {
    isotope_set(Site::II, site_ii_g(), 0.3e9)
}

/// Site I I = 0 spec; its g-tensor has D1–b and D2–b cross terms, so the
/// two sub-sites separate once the field leaves the b axis.
pub fn tilted_tensor_spec() -> SpinSystemSpec {
    site_i_isotopes().remove(0)
}
