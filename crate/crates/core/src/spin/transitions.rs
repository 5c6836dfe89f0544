use nalgebra::{Matrix3, Vector3};
use rayon::prelude::*;

use super::eigen::eigenvalues;
use super::hamiltonian::{hamiltonian_from_ops, moment_operator_from_ops, spin_operators, SpinOperators};
use super::{axes, eigensystem, CMatrix, EnergyLevels, FieldConfig, SpinSystemSpec, Transition, TransitionKind};
use crate::numerics::bisect;
use crate::{Error, Result};

/// Effective g-factor along `direction`: |gᵀ d| = sqrt(dᵀ g gᵀ d).
pub fn g_effective(g: &Matrix3<f64>, direction: &Vector3<f64>) -> f64 {
    (g.transpose() * direction).norm()
}

/// The two magnetically inequivalent sub-sites related by the C2 rotation
/// about b. The second member has every tensor conjugated by diag(−1, −1, 1).
pub fn subsite_pair(spec: &SpinSystemSpec) -> (SpinSystemSpec, SpinSystemSpec) {
    let r = Matrix3::from_diagonal(&Vector3::new(-1.0, -1.0, 1.0));
    let rot = |t: &Matrix3<f64>| r * t * r.transpose();
    let mut partner = spec.clone();
    partner.label = format!("{}'", spec.label);
    partner.g = rot(&spec.g);
    partner.a = rot(&spec.a);
    partner.q = spec.q.as_ref().map(rot);
    (spec.clone(), partner)
}

/// |⟨j| (gᵀu)·S − (hγ_n/μ_B) u·I |i⟩| in units of μ_B.
pub fn transition_moment(
    levels: &EnergyLevels,
    spec: &SpinSystemSpec,
    i: usize,
    j: usize,
    drive_axis: &Vector3<f64>,
) -> Result<f64> {
    if i == j {
        return Err(Error::InvalidInput("transition moment needs two distinct levels".into()));
    }
    if i.max(j) >= levels.len() {
        return Err(Error::InvalidInput(format!("level index out of range ({} levels)", levels.len())));
    }
    let ops = spin_operators(spec.two_i);
    let m = moment_operator_from_ops(spec, &ops, drive_axis);
    Ok(levels.matrix_element(i, j, &m))
}

/// Nominal quantum-number labels for every level: the electron projection on
/// the effective Zeeman axis and the nuclear projection on the hyperfine axis.
#[derive(Debug, Clone)]
pub(crate) struct LevelLabels {
    pub electron: Vec<f64>,
    pub nuclear: Vec<f64>,
}

impl LevelLabels {
    pub fn manifold(&self, k: usize) -> i8 {
        if self.electron[k] >= 0.0 {
            1
        } else {
            -1
        }
    }

    pub fn nominal_mi(&self, k: usize) -> f64 {
        (2.0 * self.nuclear[k]).round() / 2.0
    }
}

pub(crate) fn label_levels(
    levels: &EnergyLevels,
    spec: &SpinSystemSpec,
    ops: &SpinOperators,
    direction: &Vector3<f64>,
) -> LevelLabels {
    let ge = spec.g.transpose() * direction;
    let n_e = if ge.norm() > 0.0 { ge / ge.norm() } else { *direction };
    let hf = spec.a.transpose() * n_e;
    let mut n_n = if hf.norm() > 1e-9 * spec.a.amax().max(1.0) { hf / hf.norm() } else { *direction };
    if n_n.dot(direction) < 0.0 {
        n_n = -n_n;
    }
    let proj = |v: &Vector3<f64>, op: &[CMatrix; 3]| {
        let mut m = &op[0] * super::Complex64::new(v.x, 0.0);
        m += &op[1] * super::Complex64::new(v.y, 0.0);
        m += &op[2] * super::Complex64::new(v.z, 0.0);
        m
    };
    let se = proj(&n_e, &ops.s);
    let inuc = proj(&n_n, &ops.i);
    LevelLabels {
        electron: (0..levels.len()).map(|k| levels.expectation(k, &se)).collect(),
        nuclear: (0..levels.len()).map(|k| levels.expectation(k, &inuc)).collect(),
    }
}

pub(crate) fn describe_transition(
    levels: &EnergyLevels,
    labels: &LevelLabels,
    moment_op: &CMatrix,
    lower: usize,
    upper: usize,
    field: f64,
) -> Transition {
    let (lo, hi) = if lower < upper { (lower, upper) } else { (upper, lower) };
    let kind = if labels.manifold(lo) != labels.manifold(hi) {
        TransitionKind::Electron
    } else {
        TransitionKind::Nuclear
    };
    let lower_mi = labels.nominal_mi(lo);
    let upper_mi = labels.nominal_mi(hi);
    Transition {
        lower: lo,
        upper: hi,
        frequency: (levels.energies[hi] - levels.energies[lo]).abs(),
        moment: levels.matrix_element(lo, hi, moment_op),
        kind,
        lower_mi,
        upper_mi,
        nominal_mi_change: ((upper_mi - lower_mi).abs()).round() as i32,
        field,
    }
}

/// Controls for [`resonant_fields`].
#[derive(Debug, Clone)]
pub struct ResonanceSearch {
    /// Coarse scan step, T.
    pub grid_step: f64,
    /// Bracket width at which bisection stops, T.
    pub field_tol: f64,
    /// Frequency residual at which bisection stops, Hz.
    pub freq_tol: f64,
    /// Microwave drive axis; perpendicular to the static field when `None`.
    pub drive_axis: Option<Vector3<f64>>,
}

impl Default for ResonanceSearch {
    fn default() -> Self {
        ResonanceSearch {
            grid_step: 1e-4,
            field_tol: 1e-13,
            freq_tol: 1.0,
            drive_axis: None,
        }
    }
}

/// All level pairs whose splitting equals `mw_freq` for a field magnitude in
/// `field_range` along `direction`, with moment ≥ `min_moment`, sorted by field.
pub fn resonant_fields(
    spec: &SpinSystemSpec,
    mw_freq: f64,
    field_range: (f64, f64),
    direction: &Vector3<f64>,
    min_moment: f64,
    search: &ResonanceSearch,
) -> Result<Vec<Transition>> {
    spec.validate()?;
    let (b_lo, b_hi) = field_range;
    if !(b_hi > b_lo) || b_lo < 0.0 {
        return Err(Error::InvalidInput(format!("degenerate field range ({b_lo}, {b_hi})")));
    }
    if !(mw_freq > 0.0) {
        return Err(Error::InvalidInput("microwave frequency must be positive".into()));
    }
    if !(search.grid_step > 0.0) {
        return Err(Error::InvalidInput("grid step must be positive".into()));
    }
    let dir = FieldConfig::along(1.0, *direction)?.direction;
    let drive = search.drive_axis.unwrap_or_else(|| axes::perpendicular_to(&dir));
    let ops = spin_operators(spec.two_i);
    let dim = spec.dimension();
    let energies_at = |b: f64| eigenvalues(&hamiltonian_from_ops(spec, &ops, &(dir * b)));

    let steps = ((b_hi - b_lo) / search.grid_step).ceil().max(1.0) as usize;
    let grid: Vec<f64> = (0..=steps)
        .map(|k| (b_lo + k as f64 * search.grid_step).min(b_hi))
        .collect();
    let spectra: Vec<Vec<f64>> = grid.par_iter().map(|&b| energies_at(b)).collect();

    let mut brackets = Vec::new();
    for k in 0..grid.len() - 1 {
        for i in 0..dim {
            for j in i + 1..dim {
                let d0 = spectra[k][j] - spectra[k][i] - mw_freq;
                let d1 = spectra[k + 1][j] - spectra[k + 1][i] - mw_freq;
                if d0 == 0.0 || d0.signum() != d1.signum() {
                    brackets.push((i, j, grid[k], grid[k + 1]));
                }
            }
        }
    }

    let moment_op = moment_operator_from_ops(spec, &ops, &drive);
    let mut found: Vec<Transition> = brackets
        .par_iter()
        .filter_map(|&(i, j, lo, hi)| {
            let b = bisect(
                |b| {
                    let e = energies_at(b);
                    e[j] - e[i] - mw_freq
                },
                lo,
                hi,
                search.field_tol,
                search.freq_tol,
            )?;
            let levels = eigensystem(&hamiltonian_from_ops(spec, &ops, &(dir * b))).ok()?;
            let labels = label_levels(&levels, spec, &ops, &dir);
            let t = describe_transition(&levels, &labels, &moment_op, i, j, b);
            (t.moment >= min_moment).then_some(t)
        })
        .collect();
    found.sort_by(|a, b| a.field.total_cmp(&b.field));
    // A crossing that lands exactly on a grid node is bracketed twice.
    found.dedup_by(|a, b| a.lower == b.lower && a.upper == b.upper && (a.field - b.field).abs() <= 2.0 * search.field_tol.max(1e-12));
    Ok(found)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::constants::MU_B_OVER_H;
    use crate::spin::{build_hamiltonian, presets, Site};

    #[test]
    fn g_eff_examples() {
        assert!((g_effective(&(Matrix3::identity() * 2.0), &Vector3::new(0.6, 0.8, 0.0)) - 2.0).abs() < 1e-15);
        let g = Matrix3::from_diagonal(&Vector3::new(6.0, 1.0, 1.0));
        assert_eq!(g_effective(&g, &Vector3::x()), 6.0);
    }

    #[test]
    fn g_eff_from_resonance_condition() {
        let g = crate::constants::PLANCK * 9.8e9 / (crate::constants::BOHR_MAGNETON * 1.0208);
        assert!((g - 0.686).abs() < 1e-3);
        assert!((g - 0.69).abs() < 0.005);
    }

    #[test]
    fn free_electron_resonance() {
        let spec = SpinSystemSpec::electron_only("e", Matrix3::identity() * 2.0, 1.0, Site::I);
        let res = resonant_fields(&spec, 9.8e9, (0.0, 0.5), &axes::b(), 0.0, &ResonanceSearch::default()).unwrap();
        assert_eq!(res.len(), 1);
        let expected = 9.8e9 / (2.0 * MU_B_OVER_H);
        assert!((res[0].field - expected).abs() < 1e-9);
        assert!((res[0].field * 1e3 - 350.1).abs() < 0.1);
        assert!((res[0].moment - 1.0).abs() < 1e-12);
        assert_eq!(res[0].kind, TransitionKind::Electron);
    }

    #[test]
    fn allowed_line_counts() {
        let set = presets::site_i_isotopes();
        for (spec, expected) in set.iter().zip([1usize, 2, 6]) {
            let res = resonant_fields(spec, 9.8e9, (0.6, 1.5), &axes::b(), 0.0, &ResonanceSearch::default()).unwrap();
            let allowed = res
                .iter()
                .filter(|t| t.kind == TransitionKind::Electron && t.nominal_mi_change == 0)
                .count();
            assert_eq!(allowed, expected, "{}", spec.label);
            for t in &res {
                let levels = eigensystem(&build_hamiltonian(spec, &FieldConfig::new(t.field, axes::b()).unwrap()).unwrap()).unwrap();
                let df = levels.energies[t.upper] - levels.energies[t.lower] - 9.8e9;
                assert!(df.abs() < 1e3, "residual {df} Hz");
            }
        }
    }

    #[test]
    fn moment_symmetric_and_selection_rule() {
        let spec = presets::site_i_isotopes()[2].clone();
        let field = FieldConfig::new(1.0, axes::b()).unwrap();
        let levels = eigensystem(&build_hamiltonian(&spec, &field).unwrap()).unwrap();
        let u = Vector3::x();
        for i in 0..levels.len() {
            for j in 0..levels.len() {
                if i != j {
                    let a = transition_moment(&levels, &spec, i, j, &u).unwrap();
                    let b = transition_moment(&levels, &spec, j, i, &u).unwrap();
                    assert!((a - b).abs() <= 1e-14 * a.max(1.0));
                }
            }
        }
        let res = resonant_fields(&spec, 9.8e9, (0.6, 1.5), &axes::b(), 0.0, &ResonanceSearch::default()).unwrap();
        let allowed = res.iter().filter(|t| t.nominal_mi_change == 0).map(|t| t.moment).fold(f64::INFINITY, f64::min);
        let forbidden = res.iter().filter(|t| t.nominal_mi_change == 1).map(|t| t.moment).fold(0.0, f64::max);
        assert!(allowed > 10.0 * forbidden, "allowed {allowed} forbidden {forbidden}");
    }

    #[test]
    fn subsites_degenerate_along_b_and_split_off_axis() {
        let spec = presets::tilted_tensor_spec();
        let (s1, s2) = subsite_pair(&spec);
        let search = ResonanceSearch::default();
        let on = |s: &SpinSystemSpec, d: &Vector3<f64>| resonant_fields(s, 9.8e9, (0.2, 2.0), d, 0.0, &search).unwrap();
        let a = on(&s1, &axes::b());
        let b = on(&s2, &axes::b());
        assert_eq!(a.len(), b.len());
        for (x, y) in a.iter().zip(&b) {
            assert!((x.field - y.field).abs() <= 1e-9 * x.field);
        }
        let tilt = axes::tilted_from_b(2.0);
        let a = on(&s1, &tilt);
        let b = on(&s2, &tilt);
        let sep = (a[0].field - b[0].field).abs();
        assert!(sep > 1e-5, "sub-site separation {sep} T");
    }
}
