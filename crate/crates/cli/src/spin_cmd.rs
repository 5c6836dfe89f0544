use clap::{Args, Subcommand};
use spinlab::io::{PlotSeries, Table};
use spinlab::nalgebra::Vector3;
use spinlab::spin::{
    build_hamiltonian, edfs_spectrum, eigensystem, endor_spectrum, format_half_integer, presets, resonant_fields,
    EdfsOptions, EndorParams, ResonanceSearch,
};
use spinlab::{FieldConfig, Spectrum, SpinSystemSpec, TransitionKind};

use crate::ctx::{linspace, parse_direction, CliError, CliResult, Ctx};

#[derive(Debug, Args)]
pub struct SystemArgs {
    /// Config label, a built-in label (e.g. `Yb171/I`), or `site-I` / `site-II`
    /// for the natural-abundance isotope set.
    #[arg(long)]
    pub system: String,
    /// `b`, `d1`, `d2` or `x,y,z`.
    #[arg(long, default_value = "b", value_parser = parse_direction)]
    pub direction: Vector3<f64>,
}

#[derive(Debug, Args)]
pub struct LevelsArgs {
    #[command(flatten)]
    pub sys: SystemArgs,
    #[arg(long, default_value_t = 0.0)]
    pub field_min_mt: f64,
    #[arg(long, default_value_t = 1500.0)]
    pub field_max_mt: f64,
    #[arg(long, default_value_t = 301)]
    pub steps: usize,
}

#[derive(Debug, Subcommand)]
pub enum SpectrumCmd {
    Edfs(EdfsArgs),
    Endor(EndorArgs),
}

#[derive(Debug, Args)]
pub struct EdfsArgs {
    #[command(flatten)]
    pub sys: SystemArgs,
    #[arg(long, default_value_t = 9.8)]
    pub freq_ghz: f64,
    #[arg(long, default_value_t = 50.0)]
    pub field_min_mt: f64,
    #[arg(long, default_value_t = 1500.0)]
    pub field_max_mt: f64,
    #[arg(long, default_value_t = 0.05)]
    pub step_mt: f64,
    /// Overrides every system's Gaussian linewidth.
    #[arg(long)]
    pub fwhm_mt: Option<f64>,
}

#[derive(Debug, Args)]
pub struct EndorArgs {
    #[command(flatten)]
    pub sys: SystemArgs,
    #[arg(long, default_value_t = 9.8)]
    pub freq_ghz: f64,
    /// Approximate field; the nearest electron transition resonant at
    /// `--freq-ghz` is selected.
    #[arg(long)]
    pub field_mt: f64,
    #[arg(long, default_value_t = 1.0)]
    pub rf_min_mhz: f64,
    #[arg(long, default_value_t = 500.0)]
    pub rf_max_mhz: f64,
    #[arg(long, default_value_t = 0.6)]
    pub rf_width_mhz: f64,
    #[arg(long, default_value_t = 0.0)]
    pub strain_mhz: f64,
    #[arg(long, default_value_t = 0.05)]
    pub step_mhz: f64,
}

const DEFAULT_FWHM_MT: f64 = 1.0;

/// Resolves a system label to specs with their EDFS linewidths (T).
pub fn resolve_systems(ctx: &Ctx, label: &str) -> CliResult<Vec<(SpinSystemSpec, f64)>> {
    if let Some(cfg) = &ctx.config {
        if let Some(s) = cfg.spin_systems.iter().find(|s| s.label == label) {
            return Ok(vec![(s.to_spec()?, s.fwhm_mt * 1e-3)]);
        }
    }
    let fwhm = DEFAULT_FWHM_MT * 1e-3;
    let builtin: Vec<SpinSystemSpec> = presets::site_i_isotopes()
        .into_iter()
        .chain(presets::site_ii_isotopes())
        .collect();
    let set = match label.to_ascii_lowercase().as_str() {
        "site-i" => presets::site_i_isotopes(),
        "site-ii" => presets::site_ii_isotopes(),
        _ => builtin.iter().filter(|s| s.label == label).cloned().collect(),
    };
    if set.is_empty() {
        let mut known: Vec<String> = ctx
            .config
            .iter()
            .flat_map(|c| c.spin_systems.iter().map(|s| s.label.clone()))
            .collect();
        known.extend(["site-I".to_string(), "site-II".to_string()]);
        known.extend(builtin.iter().map(|s| s.label.clone()));
        return Err(CliError::Usage(format!("unknown spin system `{label}`; known: {}", known.join(", "))));
    }
    Ok(set.into_iter().map(|s| (s, fwhm)).collect())
}

fn single_system(ctx: &Ctx, label: &str) -> CliResult<SpinSystemSpec> {
    let mut v = resolve_systems(ctx, label)?;
    if v.len() != 1 {
        return Err(CliError::Usage(format!("`{label}` names {} systems; pick one", v.len())));
    }
    Ok(v.remove(0).0)
}

pub fn levels(ctx: &mut Ctx, a: &LevelsArgs) -> CliResult {
    let spec = single_system(ctx, &a.sys.system)?;
    if a.steps < 1 || !(a.field_max_mt >= a.field_min_mt) || a.field_min_mt < 0.0 {
        return Err(CliError::Usage("need steps ≥ 1 and 0 ≤ field-min ≤ field-max".into()));
    }
    let dim = spec.dimension();
    let mut headers = vec!["field_T".to_string()];
    headers.extend((0..dim).map(|k| format!("E{k}_Hz")));
    let hdr: Vec<&str> = headers.iter().map(String::as_str).collect();
    let mut table = Table::new(&hdr);
    let fields = linspace(a.field_min_mt * 1e-3, a.field_max_mt * 1e-3, a.steps);
    let mut series: Vec<PlotSeries> = (0..dim)
        .map(|k| PlotSeries { label: format!("E{k}"), x: Vec::new(), y: Vec::new(), points: false })
        .collect();
    for &b in &fields {
        let field = FieldConfig::new(b, a.sys.direction)?;
        let lv = eigensystem(&build_hamiltonian(&spec, &field)?)?;
        let mut row = vec![b];
        row.extend(&lv.energies);
        for (k, s) in series.iter_mut().enumerate() {
            s.x.push(b * 1e3);
            s.y.push(lv.energies[k] * 1e-9);
        }
        table.push(row);
    }
    ctx.write_table("levels.csv", &table)?;
    ctx.write_plot(&spec.label, "field (mT)", "energy (GHz)", &series)?;
    say!("{} levels for {} at {} fields", dim, spec.label, fields.len());
    Ok(())
}

fn stick_rows(sp: &Spectrum) -> String {
    let mut s = String::from("position,weight,kind,nominal_mi_change,label\n");
    for st in &sp.sticks {
        let kind = match st.kind {
            TransitionKind::Electron => "electron",
            TransitionKind::Nuclear => "nuclear",
        };
        s += &format!("{:?},{:?},{kind},{},\"{}\"\n", st.position, st.weight, st.nominal_mi_change, st.label.replace('"', "'"));
    }
    s
}

fn emit_spectrum(ctx: &mut Ctx, sp: &Spectrum, axis_name: &str, axis_scale: f64, axis_label: &str, title: &str) -> CliResult {
    let mut table = Table::new(&[axis_name, "amplitude"]);
    for (x, y) in sp.axis.iter().zip(&sp.amplitude) {
        table.push(vec![*x, *y]);
    }
    ctx.write_table("spectrum.csv", &table)?;
    let text = stick_rows(sp);
    ctx.write_text("sticks.csv", &text)?;
    for w in &sp.warnings {
        ctx.warn(w.clone());
    }
    let series = PlotSeries {
        label: title.to_string(),
        x: sp.axis.iter().map(|x| x * axis_scale).collect(),
        y: sp.amplitude.clone(),
        points: false,
    };
    ctx.write_plot(title, axis_label, "amplitude (arb.)", &[series])?;
    say!("{} lines", sp.sticks.len());
    for st in &sp.sticks {
        say!("{:>14.6} {:>10.4e}  {}", st.position * axis_scale, st.weight, st.label);
    }
    Ok(())
}

pub fn spectrum(ctx: &mut Ctx, cmd: &SpectrumCmd) -> CliResult {
    match cmd {
        SpectrumCmd::Edfs(a) => {
            let mut systems = resolve_systems(ctx, &a.sys.system)?;
            if let Some(w) = a.fwhm_mt {
                for s in &mut systems {
                    s.1 = w * 1e-3;
                }
            }
            let opts = EdfsOptions { axis_step: a.step_mt * 1e-3, ..Default::default() };
            let sp = edfs_spectrum(
                &systems,
                a.freq_ghz * 1e9,
                (a.field_min_mt * 1e-3, a.field_max_mt * 1e-3),
                &a.sys.direction,
                &opts,
            )?;
            emit_spectrum(ctx, &sp, "field_T", 1e3, "field (mT)", "EDFS")
        }
        SpectrumCmd::Endor(a) => {
            let spec = single_system(ctx, &a.sys.system)?;
            let mw = a.freq_ghz * 1e9;
            let b0 = a.field_mt * 1e-3;
            let window = (b0 * 0.5, (b0 * 1.5).max(b0 + 0.05));
            let candidates = resonant_fields(&spec, mw, window, &a.sys.direction, 1e-3, &ResonanceSearch::default())?;
            let esr = candidates
                .into_iter()
                .filter(|t| t.kind == TransitionKind::Electron)
                .min_by(|x, y| (x.field - b0).abs().total_cmp(&(y.field - b0).abs()))
                .ok_or_else(|| {
                    CliError::Data(format!("no electron transition of {} resonant near {} mT", spec.label, a.field_mt))
                })?;
            say!(
                "selected ESR line at {:.4} mT (m_I {} -> {})",
                esr.field * 1e3,
                format_half_integer(esr.lower_mi),
                format_half_integer(esr.upper_mi)
            );
            let field = FieldConfig::new(esr.field, a.sys.direction)?;
            let params = EndorParams {
                rf_range: (a.rf_min_mhz * 1e6, a.rf_max_mhz * 1e6),
                rf_excitation_width: a.rf_width_mhz * 1e6,
                strain_width: a.strain_mhz * 1e6,
                axis_step: a.step_mhz * 1e6,
                ..Default::default()
            };
            let sp = endor_spectrum(&spec, &field, &esr, &params)?;
            emit_spectrum(ctx, &sp, "rf_Hz", 1e-6, "RF (MHz)", "ENDOR")
        }
    }
}
