//! Electron–nuclear spin Hamiltonian, eigenstructure, transitions and
//! synthetic EDFS/ENDOR spectra.
//!
//! Tensors are expressed in the crystal frame (D1, D2, b) → (x, y, z). All
//! energies are in Hz.

mod eigen;
mod hamiltonian;
pub mod presets;
mod spectra;
mod transitions;

use nalgebra::{DMatrix, Matrix3, Vector3};
use crate::{Error, Result};

pub use eigen::eigensystem;
pub use hamiltonian::{build_hamiltonian, moment_operator, spin_operators, SpinOperators};
pub use spectra::{edfs_spectrum, endor_spectrum, EdfsOptions, EndorParams};
pub use transitions::{
    g_effective, resonant_fields, subsite_pair, transition_moment, ResonanceSearch,
};

pub type Complex64 = nalgebra::Complex<f64>;
pub type CMatrix = DMatrix<Complex64>;

/// Crystallographic site.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, serde::Serialize, serde::Deserialize)]
pub enum Site {
    I,
    II,
}

impl std::fmt::Display for Site {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Site::I => write!(f, "I"),
            Site::II => write!(f, "II"),
        }
    }
}

impl std::str::FromStr for Site {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "I" | "1" | "i" => Ok(Site::I),
            "II" | "2" | "ii" => Ok(Site::II),
            other => Err(Error::InvalidInput(format!("unknown site `{other}`"))),
        }
    }
}

/// One isotope of the paramagnetic ion in one crystallographic site.
///
/// The electron spin is an effective S = 1/2. `two_i` stores 2I so that
/// half-integer nuclear spins stay exact.
#[derive(Debug, Clone, PartialEq)]
pub struct SpinSystemSpec {
    pub label: String,
    pub two_i: u8,
    pub abundance: f64,
    /// g-tensor, dimensionless.
    pub g: Matrix3<f64>,
    /// Hyperfine tensor, Hz.
    pub a: Matrix3<f64>,
    /// Nuclear quadrupole tensor, Hz (traceless). Zero when absent.
    pub q: Option<Matrix3<f64>>,
    /// Nuclear gyromagnetic ratio γ_n, Hz/T.
    pub gamma_n: f64,
    pub site: Site,
}

const SYMMETRY_TOL: f64 = 1e-9;

impl SpinSystemSpec {
    /// Electron-only (I = 0) system.
    pub fn electron_only(label: impl Into<String>, g: Matrix3<f64>, abundance: f64, site: Site) -> Self {
        SpinSystemSpec {
            label: label.into(),
            two_i: 0,
            abundance,
            g,
            a: Matrix3::zeros(),
            q: None,
            gamma_n: 0.0,
            site,
        }
    }

    pub fn nuclear_spin(&self) -> f64 {
        f64::from(self.two_i) / 2.0
    }

    /// Hilbert-space dimension 2(2I + 1).
    pub fn dimension(&self) -> usize {
        2 * (usize::from(self.two_i) + 1)
    }

    /// Number of nuclear sub-levels 2I + 1.
    pub fn nuclear_multiplicity(&self) -> usize {
        usize::from(self.two_i) + 1
    }

    pub fn validate(&self) -> Result<()> {
        let fail = |reason: String| Error::InvalidSpec {
            label: self.label.clone(),
            reason,
        };
        if !(0.0..=1.0).contains(&self.abundance) {
            return Err(fail(format!("abundance {} outside [0, 1]", self.abundance)));
        }
        if self.two_i > 9 {
            return Err(fail(format!("nuclear spin {} not supported", self.nuclear_spin())));
        }
        if self.g.iter().any(|v| !v.is_finite()) || self.a.iter().any(|v| !v.is_finite()) {
            return Err(fail("non-finite tensor element".into()));
        }
        let sv = self.g.svd(false, false).singular_values;
        if sv.iter().any(|&s| s <= 0.0) || sv.min() <= 1e-12 * sv.max() {
            return Err(fail("g-tensor is singular".into()));
        }
        let a_scale = self.a.amax().max(1.0);
        let a_asym = (self.a - self.a.transpose()).amax();
        if a_asym > SYMMETRY_TOL * a_scale {
            return Err(fail(format!("hyperfine tensor not symmetric (asymmetry {a_asym:.3e} Hz)")));
        }
        if let Some(q) = &self.q {
            let q_scale = q.amax().max(1.0);
            if (q - q.transpose()).amax() > SYMMETRY_TOL * q_scale {
                return Err(fail("quadrupole tensor not symmetric".into()));
            }
            if q.trace().abs() > SYMMETRY_TOL * q_scale {
                return Err(fail(format!("quadrupole tensor not traceless (trace {:.3e} Hz)", q.trace())));
            }
        }
        Ok(())
    }
}

/// Static field: magnitude in tesla and a unit direction in the crystal frame.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FieldConfig {
    pub magnitude: f64,
    pub direction: Vector3<f64>,
}

impl FieldConfig {
    /// Validating constructor: `|direction| = 1` within 1e-12, magnitude ≥ 0.
    pub fn new(magnitude: f64, direction: Vector3<f64>) -> Result<Self> {
        if !(magnitude >= 0.0) || !magnitude.is_finite() {
            return Err(Error::InvalidInput(format!("field magnitude {magnitude} must be ≥ 0")));
        }
        if (direction.norm() - 1.0).abs() > 1e-12 {
            return Err(Error::InvalidInput(format!(
                "field direction must be a unit vector (norm {})",
                direction.norm()
            )));
        }
        Ok(FieldConfig { magnitude, direction })
    }

    /// Normalises `direction` before constructing.
    pub fn along(magnitude: f64, direction: Vector3<f64>) -> Result<Self> {
        let n = direction.norm();
        if n == 0.0 || !n.is_finite() {
            return Err(Error::InvalidInput("zero field direction".into()));
        }
        Self::new(magnitude, direction / n)
    }

    pub fn vector(&self) -> Vector3<f64> {
        self.direction * self.magnitude
    }
}

/// Crystal-frame unit vectors.
pub mod axes {
    use nalgebra::Vector3;

    pub fn d1() -> Vector3<f64> {
        Vector3::x()
    }

    pub fn d2() -> Vector3<f64> {
        Vector3::y()
    }

    pub fn b() -> Vector3<f64> {
        Vector3::z()
    }

    /// Direction in the D1–D2 plane at `deg` degrees from D1.
    pub fn in_d1d2_plane(deg: f64) -> Vector3<f64> {
        let t = deg.to_radians();
        Vector3::new(t.cos(), t.sin(), 0.0)
    }

    /// Direction tilted by `deg` degrees from b towards D1.
    pub fn tilted_from_b(deg: f64) -> Vector3<f64> {
        let t = deg.to_radians();
        Vector3::new(t.sin(), 0.0, t.cos())
    }

    /// A unit vector perpendicular to `d`.
    pub fn perpendicular_to(d: &Vector3<f64>) -> Vector3<f64> {
        let trial = if d.x.abs() < 0.9 { Vector3::x() } else { Vector3::y() };
        let p = trial - d * d.dot(&trial);
        p / p.norm()
    }
}

/// Eigen-decomposition of a spin Hamiltonian.
#[derive(Debug, Clone)]
pub struct EnergyLevels {
    /// Ascending energies, Hz.
    pub energies: Vec<f64>,
    /// Column k is the eigenvector of `energies[k]` over |m_S⟩⊗|m_I⟩.
    pub states: CMatrix,
}

impl EnergyLevels {
    pub fn len(&self) -> usize {
        self.energies.len()
    }

    pub fn is_empty(&self) -> bool {
        self.energies.is_empty()
    }

    /// Expectation value ⟨k| op |k⟩ (real part).
    pub fn expectation(&self, k: usize, op: &CMatrix) -> f64 {
        let v = self.states.column(k);
        (v.adjoint() * op * v)[(0, 0)].re
    }

    /// |⟨j| op |i⟩|.
    pub fn matrix_element(&self, i: usize, j: usize, op: &CMatrix) -> f64 {
        let vi = self.states.column(i);
        let vj = self.states.column(j);
        (vj.adjoint() * op * vi)[(0, 0)].norm()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TransitionKind {
    Electron,
    Nuclear,
}

/// A pair of eigenlevels at a given field.
#[derive(Debug, Clone, PartialEq)]
pub struct Transition {
    pub lower: usize,
    pub upper: usize,
    /// Hz.
    pub frequency: f64,
    /// Transition moment in units of μ_B.
    pub moment: f64,
    pub kind: TransitionKind,
    /// Nominal m_I labels of the two levels (projections, rounded to half-integers).
    pub lower_mi: f64,
    pub upper_mi: f64,
    pub nominal_mi_change: i32,
    /// Field magnitude at which the transition was evaluated, T.
    pub field: f64,
}

/// One spectral line before broadening.
#[derive(Debug, Clone, PartialEq)]
pub struct Stick {
    pub position: f64,
    pub weight: f64,
    pub label: String,
    pub kind: TransitionKind,
    pub nominal_mi_change: i32,
}

/// Broadened spectrum on a strictly increasing axis (T for EDFS, Hz for ENDOR).
#[derive(Debug, Clone, Default)]
pub struct Spectrum {
    pub axis: Vec<f64>,
    pub amplitude: Vec<f64>,
    pub sticks: Vec<Stick>,
    pub warnings: Vec<String>,
}

impl Spectrum {
    /// Trapezoidal integral of the broadened amplitude.
    pub fn integral(&self) -> f64 {
        self.axis
            .windows(2)
            .zip(self.amplitude.windows(2))
            .map(|(x, y)| 0.5 * (x[1] - x[0]) * (y[0] + y[1]))
            .sum()
    }
}

/// Formats a half-integer projection as `+3/2`, `-1/2`, `0`.
pub fn format_half_integer(m: f64) -> String {
    let twice = (2.0 * m).round() as i64;
    if twice == 0 {
        "0".to_string()
    } else if twice % 2 == 0 {
        format!("{:+}", twice / 2)
    } else {
        format!("{:+}/2", twice)
    }
}
