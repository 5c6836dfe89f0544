use nalgebra::Vector3;

use super::hamiltonian::{hamiltonian_from_ops, moment_operator_from_ops, spin_operators};
use super::transitions::{describe_transition, label_levels, resonant_fields, ResonanceSearch};
use super::{
    axes, eigensystem, format_half_integer, FieldConfig, Spectrum, SpinSystemSpec, Stick, Transition,
    TransitionKind,
};
use crate::{Error, Result};

const FWHM_TO_SIGMA: f64 = 0.424_660_900_144_009_5; // 1 / (2 sqrt(2 ln 2))

#[derive(Debug, Clone)]
pub struct EdfsOptions {
    /// Output axis spacing, T.
    pub axis_step: f64,
    /// Transitions with smaller moment (μ_B) are dropped.
    pub min_moment: f64,
    pub search: ResonanceSearch,
}

impl Default for EdfsOptions {
    fn default() -> Self {
        EdfsOptions {
            axis_step: 5e-5,
            min_moment: 1e-3,
            search: ResonanceSearch::default(),
        }
    }
}

fn uniform_axis(lo: f64, hi: f64, step: f64) -> Vec<f64> {
    let n = ((hi - lo) / step).floor() as usize;
    let mut axis: Vec<f64> = (0..=n).map(|k| lo + k as f64 * step).collect();
    if hi - axis[n] > 1e-9 * step {
        axis.push(hi);
    }
    axis
}

fn broaden(axis: &[f64], sticks: &[(f64, f64, f64)]) -> Vec<f64> {
    axis.iter()
        .map(|&x| {
            sticks
                .iter()
                .map(|&(pos, w, fwhm)| {
                    let s = fwhm * FWHM_TO_SIGMA;
                    let z = (x - pos) / s;
                    if z.abs() > 40.0 {
                        0.0
                    } else {
                        w * (-0.5 * z * z).exp() / (s * (2.0 * std::f64::consts::PI).sqrt())
                    }
                })
                .sum()
        })
        .collect()
}

fn transition_label(spec: &SpinSystemSpec, t: &Transition) -> String {
    if spec.two_i == 0 {
        return spec.label.clone();
    }
    match t.kind {
        TransitionKind::Electron if t.nominal_mi_change == 0 => {
            format!("{} mI={}", spec.label, format_half_integer(t.lower_mi))
        }
        _ => format!(
            "{} {}:{}",
            spec.label,
            format_half_integer(t.lower_mi),
            format_half_integer(t.upper_mi)
        ),
    }
}

/// Echo-detected field-swept spectrum at fixed microwave frequency.
///
/// Each entry of `specs` pairs a spin system with its Gaussian FWHM in tesla.
/// Stick weights are abundance × moment² / (2I + 1), so the summed weight of
/// an isotope's allowed family tracks its abundance.
pub fn edfs_spectrum(
    specs: &[(SpinSystemSpec, f64)],
    mw_freq: f64,
    field_range: (f64, f64),
    direction: &Vector3<f64>,
    opts: &EdfsOptions,
) -> Result<Spectrum> {
    if !(opts.axis_step > 0.0) {
        return Err(Error::InvalidInput("axis step must be positive".into()));
    }
    let mut sticks = Vec::new();
    let mut shapes = Vec::new();
    let mut warnings = Vec::new();
    for (spec, width) in specs {
        if !(*width > 0.0) {
            return Err(Error::InvalidInput(format!("linewidth for `{}` must be positive", spec.label)));
        }
        let lines = resonant_fields(spec, mw_freq, field_range, direction, opts.min_moment, &opts.search)?;
        if lines.is_empty() {
            warnings.push(format!("no transitions for `{}` in range", spec.label));
        }
        let share = spec.abundance / spec.nuclear_multiplicity() as f64;
        for t in lines.iter().filter(|t| t.kind == TransitionKind::Electron) {
            let weight = share * t.moment * t.moment;
            shapes.push((t.field, weight, *width));
            sticks.push(Stick {
                position: t.field,
                weight,
                label: transition_label(spec, t),
                kind: t.kind,
                nominal_mi_change: t.nominal_mi_change,
            });
        }
    }
    sticks.sort_by(|a, b| a.position.total_cmp(&b.position));
    let axis = uniform_axis(field_range.0, field_range.1, opts.axis_step);
    let amplitude = broaden(&axis, &shapes);
    Ok(Spectrum {
        axis,
        amplitude,
        sticks,
        warnings,
    })
}

#[derive(Debug, Clone)]
pub struct EndorParams {
    /// RF window, Hz.
    pub rf_range: (f64, f64),
    /// RF excitation bandwidth (FWHM), Hz.
    pub rf_excitation_width: f64,
    /// A-strain broadening (FWHM), Hz.
    pub strain_width: f64,
    /// RF drive axis; perpendicular to the field when `None`.
    pub rf_axis: Option<Vector3<f64>>,
    /// Allowed mismatch between the selected ESR frequency and the level
    /// splitting at the requested field before a warning is raised, Hz.
    pub esr_tolerance: f64,
    pub axis_step: f64,
    pub min_moment: f64,
}

impl Default for EndorParams {
    fn default() -> Self {
        EndorParams {
            rf_range: (1e6, 500e6),
            rf_excitation_width: 0.6e6,
            strain_width: 0.0,
            rf_axis: None,
            esr_tolerance: 5e6,
            axis_step: 50e3,
            min_moment: 0.0,
        }
    }
}

/// Davies-ENDOR spectrum: nuclear transitions out of the two levels of the
/// selected ESR transition, each within its own electron manifold.
pub fn endor_spectrum(
    spec: &SpinSystemSpec,
    field: &FieldConfig,
    selected_esr: &Transition,
    params: &EndorParams,
) -> Result<Spectrum> {
    if selected_esr.kind != TransitionKind::Electron {
        return Err(Error::InvalidInput("ENDOR needs an electron-kind ESR transition".into()));
    }
    let (rf_lo, rf_hi) = params.rf_range;
    if !(rf_hi > rf_lo) || !(params.axis_step > 0.0) {
        return Err(Error::InvalidInput("invalid RF window".into()));
    }
    spec.validate()?;
    let ops = spin_operators(spec.two_i);
    let levels = eigensystem(&hamiltonian_from_ops(spec, &ops, &field.vector()))?;
    if selected_esr.upper >= levels.len() {
        return Err(Error::InvalidInput("selected transition does not belong to this spin system".into()));
    }
    let labels = label_levels(&levels, spec, &ops, &field.direction);
    let rf_axis = params.rf_axis.unwrap_or_else(|| axes::perpendicular_to(&field.direction));
    let moment_op = moment_operator_from_ops(spec, &ops, &rf_axis);

    let mut warnings = Vec::new();
    let esr_now = levels.energies[selected_esr.upper] - levels.energies[selected_esr.lower];
    if (esr_now - selected_esr.frequency).abs() > params.esr_tolerance {
        warnings.push(format!(
            "field off resonance: selected ESR transition is at {:.6} GHz here, expected {:.6} GHz",
            esr_now * 1e-9,
            selected_esr.frequency * 1e-9
        ));
    }

    let width = params.rf_excitation_width.max(params.strain_width);
    if !(width > 0.0) {
        return Err(Error::InvalidInput("ENDOR linewidth must be positive".into()));
    }
    let mut sticks = Vec::new();
    let mut shapes = Vec::new();
    for (anchor, sign) in [(selected_esr.lower, "-"), (selected_esr.upper, "+")] {
        let manifold = labels.manifold(anchor);
        for k in 0..levels.len() {
            if k == anchor || labels.manifold(k) != manifold {
                continue;
            }
            let t = describe_transition(&levels, &labels, &moment_op, anchor, k, field.magnitude);
            if t.frequency < rf_lo || t.frequency > rf_hi || t.moment < params.min_moment {
                continue;
            }
            let weight = t.moment * t.moment;
            shapes.push((t.frequency, weight, width));
            sticks.push(Stick {
                position: t.frequency,
                weight,
                label: format!(
                    "{}{sign}:{}{sign}",
                    format_half_integer(labels.nominal_mi(anchor)),
                    format_half_integer(labels.nominal_mi(k))
                ),
                kind: TransitionKind::Nuclear,
                nominal_mi_change: t.nominal_mi_change,
            });
        }
    }
    sticks.sort_by(|a, b| a.position.total_cmp(&b.position));
    let axis = uniform_axis(rf_lo, rf_hi, params.axis_step);
    let amplitude = broaden(&axis, &shapes);
    Ok(Spectrum {
        axis,
        amplitude,
        sticks,
        warnings,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::spin::{presets, Site};
    use nalgebra::Matrix3;

    #[test]
    fn single_line_edfs() {
        let spec = SpinSystemSpec::electron_only("e", Matrix3::identity() * 2.0, 1.0, Site::I);
        let s = edfs_spectrum(&[(spec, 1e-3)], 9.8e9, (0.3, 0.4), &axes::b(), &EdfsOptions::default()).unwrap();
        assert_eq!(s.sticks.len(), 1);
        assert!((s.integral() - s.sticks[0].weight).abs() < 1e-6 * s.sticks[0].weight);
        let peak = s.amplitude.iter().cloned().fold(0.0, f64::max);
        let at = s.axis[s.amplitude.iter().position(|&a| a == peak).unwrap()];
        assert!((at - 0.3501).abs() < 1e-4);
        assert!(s.axis.windows(2).all(|w| w[1] > w[0]));
        assert!(s.amplitude.iter().all(|&a| a >= 0.0));
    }

    #[test]
    fn first_order_endor_lines() {
        let a = 200e6;
        let gn = 7.5e6;
        let spec = SpinSystemSpec {
            label: "hf".into(),
            two_i: 1,
            abundance: 1.0,
            g: Matrix3::identity() * 2.0,
            a: Matrix3::identity() * a,
            q: None,
            gamma_n: gn,
            site: Site::I,
        };
        let res = resonant_fields(&spec, 9.8e9, (0.2, 0.5), &axes::b(), 0.1, &ResonanceSearch::default()).unwrap();
        assert_eq!(res.len(), 2);
        let t = &res[0];
        let field = FieldConfig::new(t.field, axes::b()).unwrap();
        let s = endor_spectrum(&spec, &field, t, &EndorParams::default()).unwrap();
        assert!(s.warnings.is_empty());
        assert_eq!(s.sticks.len(), 2);
        let b = t.field;
        let mut expected = [(a / 2.0 - gn * b).abs(), (a / 2.0 + gn * b).abs()];
        expected.sort_by(f64::total_cmp);
        for (stick, f) in s.sticks.iter().zip(expected) {
            // second-order shifts are ~A²/(4 f_e) ≈ 1 MHz here
            assert!((stick.position - f).abs() < 2e6, "{} vs {}", stick.position, f);
        }
    }

    #[test]
    fn endor_site_i_173_below_400_mhz() {
        let spec = presets::site_i_isotopes()[2].clone();
        let res = resonant_fields(&spec, 9.8e9, (0.6, 1.5), &axes::b(), 0.05, &ResonanceSearch::default()).unwrap();
        assert!(!res.is_empty());
        for t in res.iter().filter(|t| t.nominal_mi_change == 0) {
            let field = FieldConfig::new(t.field, axes::b()).unwrap();
            let params = EndorParams {
                rf_range: (1e3, 2e9),
                min_moment: 1e-3,
                ..EndorParams::default()
            };
            let s = endor_spectrum(&spec, &field, t, &params).unwrap();
            assert!(s.sticks.iter().any(|x| x.nominal_mi_change == 1));
            assert!(s.sticks.iter().all(|x| x.position < 400e6));
        }
    }

    #[test]
    fn off_resonance_warning() {
        let spec = presets::site_i_isotopes()[1].clone();
        let res = resonant_fields(&spec, 9.8e9, (0.6, 1.5), &axes::b(), 0.05, &ResonanceSearch::default()).unwrap();
        let t = &res[0];
        let field = FieldConfig::new(t.field + 0.01, axes::b()).unwrap();
        let s = endor_spectrum(&spec, &field, t, &EndorParams::default()).unwrap();
        assert_eq!(s.warnings.len(), 1);
    }
}
